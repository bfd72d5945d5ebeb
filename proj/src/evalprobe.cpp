#include "tvssl/evalprobe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

using json = nlohmann::json;

namespace tvssl {

ProbeKind probe_kind_from_string(const std::string& s) {
  if (s == "linear") return ProbeKind::kLinear;
  if (s == "mlp") return ProbeKind::kMlp;
  throw ConfigError("unknown probe kind: " + s);
}

ProbeTask probe_task_from_string(const std::string& s) {
  if (s == "single_label") return ProbeTask::kSingleLabel;
  if (s == "multi_label") return ProbeTask::kMultiLabel;
  throw ConfigError("unknown probe task: " + s);
}

void ProbeConfig::validate() const {
  TVSSL_CHECK_CFG(epochs >= 0, "probe epochs must be >= 0");
  TVSSL_CHECK_CFG(lr > 0, "probe lr must be > 0");
  TVSSL_CHECK_CFG(batch_size >= 1, "probe batch_size must be >= 1");
}

std::string MetricReport::to_json() const {
  json j{{"top1", top1},
         {"f1_sample", f1_sample},
         {"f1_micro", f1_micro},
         {"f1_macro", f1_macro},
         {"f1_weighted", f1_weighted}};
  return j.dump(2);
}

std::string MetricReport::to_table(ProbeTask task) const {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  if (task == ProbeTask::kSingleLabel) {
    os << "metric   value\n";
    os << "top1     " << top1 << "\n";
  } else {
    os << "metric       value\n";
    os << "f1_sample    " << f1_sample << "\n";
    os << "f1_micro     " << f1_micro << "\n";
    os << "f1_macro     " << f1_macro << "\n";
    os << "f1_weighted  " << f1_weighted << "\n";
  }
  return os.str();
}

Tensor extract_features(Model& model, const Tensor& images) {
  TVSSL_CHECK(images.ndim() == 4, "extract_features expects [N,3,S,S]");
  const int64_t N = images.dim(0);
  const int64_t S = model.encoder.config().input_size;
  TVSSL_CHECK(images.dim(2) == S && images.dim(3) == S,
              "image size " << images.dim(2) << " != encoder input size " << S);
  const int64_t nrkhs = model.encoder.config().nrkhs;
  Tensor out({N, nrkhs});
  // chunked eval-mode forward; no tape is active so nothing is recorded
  const int64_t chunk = 128;
  for (int64_t start = 0; start < N; start += chunk) {
    const int64_t n = std::min(chunk, N - start);
    Tensor part({n, 3, S, S});
    std::copy(images.data() + start * 3 * S * S,
              images.data() + (start + n) * 3 * S * S, part.data());
    MultiscaleFeatures feats = model.encoder.forward(part, false);
    std::copy(feats.f1.data(), feats.f1.data() + n * nrkhs, out.data() + start * nrkhs);
  }
  return out;
}

Tensor extract_features(const Checkpoint& ckpt, const Tensor& images) {
  Model model = model_from_checkpoint(ckpt);
  return extract_features(model, images);
}

Tensor Probe::forward(const Tensor& features) const {
  if (cfg.kind == ProbeKind::kMlp)
    return head.forward(ops::relu(hidden.forward(features)));
  return head.forward(features);
}

std::vector<Tensor> Probe::parameters() {
  std::vector<Tensor> out{head.weight, head.bias};
  if (cfg.kind == ProbeKind::kMlp) {
    out.push_back(hidden.weight);
    out.push_back(hidden.bias);
  }
  return out;
}

Probe train_probe(const Tensor& features, const std::vector<std::vector<int>>& labels,
                  int64_t n_classes, const ProbeConfig& cfg) {
  cfg.validate();
  TVSSL_CHECK(features.ndim() == 2, "train_probe: features must be [N,D]");
  const int64_t N = features.dim(0), D = features.dim(1);
  TVSSL_CHECK(static_cast<int64_t>(labels.size()) == N,
              "train_probe: " << labels.size() << " labels for " << N << " features");
  TVSSL_CHECK(n_classes >= 2, "train_probe: need at least 2 classes");
  for (const auto& l : labels) {
    TVSSL_CHECK(!l.empty(), "train_probe: empty label set");
    for (int c : l) TVSSL_CHECK(c >= 0 && c < n_classes, "label " << c << " out of range");
  }
  if (cfg.task == ProbeTask::kSingleLabel) {
    int first = labels[0][0];
    bool varied = false;
    for (const auto& l : labels) varied |= (l[0] != first);
    TVSSL_CHECK(varied, "train_probe: single class only");
  }

  Probe probe;
  probe.cfg = cfg;
  probe.n_classes = n_classes;
  Rng rng(mix64(cfg.seed ^ 0x50524f42ull));
  if (cfg.kind == ProbeKind::kMlp) {
    probe.hidden = nn::Linear(D, D, rng);
    probe.head = nn::Linear(D, n_classes, rng);
  } else {
    probe.head = nn::Linear(D, n_classes, rng);
  }

  nn::Adam adam(probe.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, 0.0});
  // features are a frozen constant: requires_grad stays false, so probe
  // training cannot write gradients upstream
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches =
        make_batches(static_cast<size_t>(N), std::min<int64_t>(cfg.batch_size, N),
                     cfg.seed, epoch);
    for (const auto& batch : batches) {
      const int64_t B = static_cast<int64_t>(batch.size());
      Tensor x({B, D});
      for (int64_t r = 0; r < B; ++r)
        std::copy(features.data() + static_cast<int64_t>(batch[static_cast<size_t>(r)]) * D,
                  features.data() + static_cast<int64_t>(batch[static_cast<size_t>(r)]) * D + D,
                  x.data() + r * D);
      Tape tape;
      TapeScope scope(tape);
      Tensor logits = probe.forward(x);
      Tensor loss;
      if (cfg.task == ProbeTask::kSingleLabel) {
        std::vector<int> y(static_cast<size_t>(B));
        for (int64_t r = 0; r < B; ++r) y[static_cast<size_t>(r)] = labels[batch[static_cast<size_t>(r)]][0];
        loss = ops::softmax_cross_entropy(logits, y);
      } else {
        Tensor targets({B, n_classes});
        for (int64_t r = 0; r < B; ++r)
          for (int c : labels[batch[static_cast<size_t>(r)]])
            targets.data()[r * n_classes + c] = 1.0;
        loss = ops::sigmoid_bce(logits, targets);
      }
      tape.backward(loss);
      adam.step();
      adam.zero_grad();
    }
  }
  return probe;
}

MetricReport multilabel_f1(const std::vector<std::vector<bool>>& pred,
                           const std::vector<std::vector<bool>>& truth) {
  TVSSL_CHECK(!pred.empty() && pred.size() == truth.size(), "multilabel_f1 size mismatch");
  const size_t N = pred.size();
  const size_t C = pred[0].size();
  MetricReport rep;

  // sample-averaged
  double sample_sum = 0.0;
  for (size_t i = 0; i < N; ++i) {
    int inter = 0, p = 0, t = 0;
    for (size_t c = 0; c < C; ++c) {
      inter += pred[i][c] && truth[i][c];
      p += pred[i][c];
      t += truth[i][c];
    }
    sample_sum += (p + t) > 0 ? 2.0 * inter / static_cast<double>(p + t) : 0.0;
  }
  rep.f1_sample = sample_sum / static_cast<double>(N);

  // per-class counts
  std::vector<int64_t> tp(C, 0), fp(C, 0), fn(C, 0), support(C, 0);
  for (size_t i = 0; i < N; ++i)
    for (size_t c = 0; c < C; ++c) {
      if (pred[i][c] && truth[i][c]) ++tp[c];
      if (pred[i][c] && !truth[i][c]) ++fp[c];
      if (!pred[i][c] && truth[i][c]) ++fn[c];
      if (truth[i][c]) ++support[c];
    }

  int64_t tp_all = 0, fp_all = 0, fn_all = 0, support_all = 0;
  double macro_sum = 0.0, weighted_sum = 0.0;
  for (size_t c = 0; c < C; ++c) {
    const int64_t denom = 2 * tp[c] + fp[c] + fn[c];
    const double f1 = denom > 0 ? 2.0 * tp[c] / static_cast<double>(denom) : 0.0;
    macro_sum += f1;  // absent classes contribute 0
    weighted_sum += f1 * static_cast<double>(support[c]);
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
    support_all += support[c];
  }
  const int64_t micro_denom = 2 * tp_all + fp_all + fn_all;
  rep.f1_micro = micro_denom > 0 ? 2.0 * tp_all / static_cast<double>(micro_denom) : 0.0;
  rep.f1_macro = macro_sum / static_cast<double>(C);
  rep.f1_weighted = support_all > 0 ? weighted_sum / static_cast<double>(support_all) : 0.0;
  return rep;
}

MetricReport evaluate(const Probe& probe, const Tensor& features,
                      const std::vector<std::vector<int>>& labels, ProbeTask task) {
  TVSSL_CHECK(features.ndim() == 2 && features.dim(0) >= 1, "evaluate: empty evaluation set");
  const int64_t N = features.dim(0);
  TVSSL_CHECK(static_cast<int64_t>(labels.size()) == N, "evaluate: label count mismatch");
  TVSSL_CHECK(task == probe.cfg.task, "evaluate: task does not match probe");

  Tensor logits = probe.forward(features);
  const int64_t C = probe.n_classes;
  MetricReport rep;
  if (task == ProbeTask::kSingleLabel) {
    int64_t correct = 0;
    for (int64_t i = 0; i < N; ++i) {
      const double* row = logits.data() + i * C;
      int64_t arg = 0;
      for (int64_t c = 1; c < C; ++c)
        if (row[c] > row[arg]) arg = c;
      if (arg == labels[static_cast<size_t>(i)][0]) ++correct;
    }
    rep.top1 = static_cast<double>(correct) / static_cast<double>(N);
  } else {
    std::vector<std::vector<bool>> pred(static_cast<size_t>(N),
                                        std::vector<bool>(static_cast<size_t>(C), false));
    std::vector<std::vector<bool>> truth = pred;
    for (int64_t i = 0; i < N; ++i) {
      const double* row = logits.data() + i * C;
      for (int64_t c = 0; c < C; ++c)
        pred[static_cast<size_t>(i)][static_cast<size_t>(c)] = row[c] >= 0.0;  // sigmoid >= 0.5
      for (int c : labels[static_cast<size_t>(i)])
        truth[static_cast<size_t>(i)][static_cast<size_t>(c)] = true;
    }
    rep = multilabel_f1(pred, truth);
  }
  return rep;
}

}  // namespace tvssl
