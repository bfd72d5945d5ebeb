#ifndef TVSSL_EVALPROBE_HPP_
#define TVSSL_EVALPROBE_HPP_

#include <string>
#include <vector>

#include "tvssl/trainer.hpp"

namespace tvssl {

enum class ProbeKind { kLinear, kMlp };
enum class ProbeTask { kSingleLabel, kMultiLabel };

ProbeKind probe_kind_from_string(const std::string& s);
ProbeTask probe_task_from_string(const std::string& s);

struct ProbeConfig {
  ProbeKind kind = ProbeKind::kLinear;
  ProbeTask task = ProbeTask::kSingleLabel;
  int64_t epochs = 50;
  double lr = 1e-3;
  int64_t batch_size = 64;
  uint64_t seed = 0;

  void validate() const;
};

struct MetricReport {
  double top1 = 0.0;                                        // single-label
  double f1_sample = 0.0, f1_micro = 0.0, f1_macro = 0.0,   // multi-label
      f1_weighted = 0.0;

  std::string to_json() const;
  std::string to_table(ProbeTask task) const;
};

// Frozen-encoder global features (f1 tap), eval mode, no augmentation, no
// gradients recorded. images: [N,3,S,S] at the encoder's input size.
Tensor extract_features(const Checkpoint& ckpt, const Tensor& images);
Tensor extract_features(Model& model, const Tensor& images);

// Classifier head on frozen features; one hidden relu layer of width
// n_features for the MLP kind.
struct Probe {
  ProbeConfig cfg;
  int64_t n_classes = 0;
  nn::Linear hidden;  // MLP only
  nn::Linear head;

  Tensor forward(const Tensor& features) const;
  std::vector<Tensor> parameters();
};

// single-label: labels[i] = class id. multi-label: labels[i] = list of
// active class ids. n_classes fixes the output width.
Probe train_probe(const Tensor& features, const std::vector<std::vector<int>>& labels,
                  int64_t n_classes, const ProbeConfig& cfg);

MetricReport evaluate(const Probe& probe, const Tensor& features,
                      const std::vector<std::vector<int>>& labels, ProbeTask task);

// metric definitions on prediction/label bitsets (exposed for the oracles)
MetricReport multilabel_f1(const std::vector<std::vector<bool>>& pred,
                           const std::vector<std::vector<bool>>& truth);

}  // namespace tvssl

#endif  // TVSSL_EVALPROBE_HPP_
