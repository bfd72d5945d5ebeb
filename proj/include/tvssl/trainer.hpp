#ifndef TVSSL_TRAINER_HPP_
#define TVSSL_TRAINER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "tvssl/augment.hpp"
#include "tvssl/data.hpp"
#include "tvssl/encoders.hpp"
#include "tvssl/objectives.hpp"

namespace tvssl {

struct TrainConfig {
  ImageEncoderConfig encoder;
  LossConfig loss;
  AugmentPolicy augment;
  int64_t batch_size = 64;
  int64_t epochs = 5;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
  int64_t log_every = 10;
  int64_t d_t = 64;                // text embedding dimension
  std::string embedding_file;      // optional plain-text table; random init if empty

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

struct Model {
  ImageEncoder encoder;
  ProjectionHeads heads;

  std::vector<Tensor> parameters();
  nn::NamedTensors named_parameters();
  nn::NamedTensors named_buffers();
};

// deterministic from (config, config.seed)
Model build_model(const TrainConfig& cfg);

struct Checkpoint {
  uint32_t version = 1;
  TrainConfig config;
  int64_t epoch = 0;       // epochs completed
  int64_t step = 0;        // optimizer steps taken
  uint64_t rng_seed = 0;
  nn::NamedTensors params;
  nn::NamedTensors buffers;
  std::vector<std::vector<double>> adam_m, adam_v;  // aligned with params order
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// rebuilds the model from ckpt.config and copies parameters/buffers by name
Model model_from_checkpoint(const Checkpoint& ckpt);

struct LossRow {
  int64_t step;
  double intra, inter, total;
};

void write_history_csv(const std::string& path, const std::vector<LossRow>& history);

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<LossRow> history;
};

// Self-supervised pretraining. Resuming from a checkpoint (taken at an epoch
// boundary) reproduces the uninterrupted trajectory exactly: batch order and
// augmentation draws are pure functions of (seed, epoch, record index).
PretrainResult pretrain(const TrainConfig& cfg, const std::vector<PairRecord>& records,
                        const TextEncoder& text_encoder,
                        const Checkpoint* resume = nullptr);

// text encoder for a run: from cfg.embedding_file when set, else randomly
// initialized over `vocab` rows and frozen
TextEncoder make_text_encoder(const TrainConfig& cfg, const Vocab& vocab);

}  // namespace tvssl

#endif  // TVSSL_TRAINER_HPP_
