#ifndef TVSSL_DATA_HPP_
#define TVSSL_DATA_HPP_

#include <string>
#include <vector>

#include "tvssl/encoders.hpp"
#include "tvssl/tensor.hpp"

namespace tvssl {

// 8-bit RGB PNG round-trip; pixel values in [0,1]
void write_png(const std::string& path, const Tensor& image);
Tensor read_png(const std::string& path);

struct PairRecord {
  Tensor image;             // [3,S,S], loaded eagerly
  std::vector<int> tokens;  // non-empty
  std::vector<int> labels;  // optional; single-label = one entry
};

// JSON Lines manifest: {"image": "...", "caption": "...", "labels": [...]}.
// Image paths are resolved relative to the manifest directory. Records with
// empty captions are rejected with a warning; the load aborts when more than
// max(1, 1% of lines) are rejected.
std::vector<PairRecord> load_manifest(const std::string& path, Vocab& vocab);

// epoch-wise shuffle keyed by (seed, epoch); trailing short batch dropped
std::vector<std::vector<size_t>> make_batches(size_t n_records, int64_t batch_size,
                                              uint64_t seed, int64_t epoch);

struct SynthSpec {
  int n_classes = 10;
  int n_samples = 1000;
  int image_size = 32;
  double overlap = 0.9;  // probability a caption token describes the image
  int caption_len = 8;
  uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  std::vector<PairRecord> records;
  Vocab vocab;
};

// Images render 1-3 colored geometric shapes; (shape, color, count) define
// the class. Caption tokens are drawn from the image's attribute words with
// probability `overlap`, otherwise uniformly from the full vocabulary.
SynthDataset generate_synthetic(const SynthSpec& spec);

// the full synthetic token vocabulary, independent of the draw
Vocab synth_vocab();

// writes PNGs plus manifest.jsonl under dir
void write_dataset(const SynthDataset& ds, const std::string& dir);

}  // namespace tvssl

#endif  // TVSSL_DATA_HPP_
