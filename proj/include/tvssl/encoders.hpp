#ifndef TVSSL_ENCODERS_HPP_
#define TVSSL_ENCODERS_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "tvssl/nn.hpp"
#include "tvssl/tensor.hpp"

namespace tvssl {

struct ImageEncoderConfig {
  int64_t ndf = 16;        // base channel width
  int64_t nrkhs = 64;      // embedding dimension of all taps
  int64_t ndepth = 1;      // residual blocks per stage
  int64_t input_size = 32; // square input edge

  void validate() const;
};

// Per-image feature taps, all projected to nrkhs channels.
struct MultiscaleFeatures {
  Tensor f1;  // [B, nrkhs]
  Tensor f5;  // [B, nrkhs, 5, 5]
  Tensor f7;  // [B, nrkhs, 7, 7]
};

namespace detail {

struct ResBlock {
  nn::Conv2d c1, c2;
  nn::BatchNorm b1, b2;
  ResBlock() = default;
  ResBlock(int64_t ch, Rng& rng);
  Tensor forward(const Tensor& x, bool training);
  void collect(const std::string& prefix, nn::NamedTensors& p, nn::NamedTensors& b);
};

// one downsampling conv followed by ndepth residual blocks
struct Stage {
  nn::Conv2d down;
  nn::BatchNorm bn;
  std::vector<ResBlock> blocks;
  Stage() = default;
  Stage(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t pad,
        int64_t ndepth, Rng& rng);
  Tensor forward(const Tensor& x, bool training);
  void collect(const std::string& prefix, nn::NamedTensors& p, nn::NamedTensors& b);
};

}  // namespace detail

// Residual conv encoder with taps at 7x7, 5x5 and 1x1 (global). The stem
// halves resolution down to 8x8, a valid 2x2 conv reaches 7x7, a valid 3x3
// conv reaches 5x5, and global average pooling produces the 1x1 tap. Each
// tap has its own 1x1-conv projection to nrkhs channels.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderConfig& cfg, uint64_t seed);

  // images: [B, 3, S, S] with S == cfg.input_size
  MultiscaleFeatures forward(const Tensor& images, bool training);

  const ImageEncoderConfig& config() const { return cfg_; }
  std::vector<Tensor> parameters();
  nn::NamedTensors named_parameters();
  nn::NamedTensors named_buffers();

 private:
  ImageEncoderConfig cfg_;
  nn::Conv2d stem_;
  nn::BatchNorm stem_bn_;
  std::vector<detail::Stage> stages_;  // halvings, then 8->7, then 7->5
  nn::Conv2d proj5_, proj7_;
  nn::Linear proj1_;
};

ImageEncoder build_image_encoder(const ImageEncoderConfig& cfg, uint64_t seed);

// lowercase, whitespace+punctuation split
std::vector<std::string> tokenize(const std::string& text);

// Token -> index map; index 0 is the reserved UNK row. While unfrozen,
// lookup() of a new token assigns the next index; frozen vocabs map unknown
// tokens to UNK.
class Vocab {
 public:
  Vocab();
  int lookup(const std::string& token);            // adds when not frozen
  int lookup_frozen(const std::string& token) const;
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  int64_t size() const { return static_cast<int64_t>(words_.size()); }
  const std::string& word(int i) const { return words_[static_cast<size_t>(i)]; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> words_;
  bool frozen_ = false;
};

// Mean-of-frozen-word-embeddings text encoder. The embedding table never
// receives gradients.
class TextEncoder {
 public:
  TextEncoder() = default;

  // randomly initialized table, then frozen
  static TextEncoder random_init(Vocab vocab, int64_t d_t, uint64_t seed);

  // plain-text table: one line per token, `token v1 v2 ... v_dt`
  static TextEncoder from_file(const std::string& path);

  // arithmetic mean of the embedding rows; throws on empty token list
  Tensor encode(const std::vector<int>& tokens) const;
  Tensor encode_batch(const std::vector<std::vector<int>>& token_batch) const;

  int64_t d_t() const { return table_.dim(1); }
  const Vocab& vocab() const { return vocab_; }
  Vocab& vocab_mutable() { return vocab_; }
  const Tensor& table() const { return table_; }
  Tensor& table_mutable() { return table_; }

 private:
  Vocab vocab_;
  Tensor table_;  // [V, d_t], requires_grad = false
};

}  // namespace tvssl

#endif  // TVSSL_ENCODERS_HPP_
