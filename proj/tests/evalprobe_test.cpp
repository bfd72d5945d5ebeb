#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "tvssl/data.hpp"
#include "tvssl/evalprobe.hpp"

using namespace tvssl;
using testutil::random_tensor;

namespace {

// linear probe over C-dimensional features, head = identity, so the logits
// are exactly the feature rows
Probe identity_probe(int64_t C, ProbeTask task) {
  Probe p;
  p.cfg.kind = ProbeKind::kLinear;
  p.cfg.task = task;
  p.n_classes = C;
  Rng rng(1);
  p.head = nn::Linear(C, C, rng);
  std::fill(p.head.weight.data(), p.head.weight.data() + C * C, 0.0);
  for (int64_t i = 0; i < C; ++i) p.head.weight.data()[i * C + i] = 1.0;
  std::fill(p.head.bias.data(), p.head.bias.data() + C, 0.0);
  return p;
}

std::vector<std::vector<bool>> random_bits(int64_t N, int64_t C, Rng& rng) {
  std::vector<std::vector<bool>> out(static_cast<size_t>(N),
                                     std::vector<bool>(static_cast<size_t>(C)));
  for (auto& row : out)
    for (size_t c = 0; c < row.size(); ++c) row[c] = rng.uniform() < 0.4;
  return out;
}

void check_report(const MetricReport& got, const MetricReport& want) {
  CHECK(std::fabs(got.f1_sample - want.f1_sample) <= 1e-12);
  CHECK(std::fabs(got.f1_micro - want.f1_micro) <= 1e-12);
  CHECK(std::fabs(got.f1_macro - want.f1_macro) <= 1e-12);
  CHECK(std::fabs(got.f1_weighted - want.f1_weighted) <= 1e-12);
}

}  // namespace

TEST_SUITE("evalprobe") {

TEST_CASE("extract_features is pure and leaves the encoder untouched") {
  TrainConfig cfg;
  cfg.encoder = ImageEncoderConfig{8, 16, 1, 32};
  cfg.d_t = 8;
  cfg.seed = 2;
  Model model = build_model(cfg);
  auto before = model.named_parameters();
  std::vector<std::vector<double>> before_vals;
  for (auto& [n, t] : before) before_vals.push_back(t.vec());
  auto bufs_before = model.named_buffers();
  std::vector<std::vector<double>> buf_vals;
  for (auto& [n, t] : bufs_before) buf_vals.push_back(t.vec());

  Rng rng(3);
  Tensor images = random_tensor({5, 3, 32, 32}, rng, 0, 1);
  Tensor f1 = extract_features(model, images);
  Tensor f2 = extract_features(model, images);
  CHECK(f1.shape() == Shape{5, 16});
  CHECK(f1.vec() == f2.vec());
  CHECK_FALSE(f1.requires_grad());

  auto after = model.named_parameters();
  for (size_t i = 0; i < after.size(); ++i) CHECK(after[i].second.vec() == before_vals[i]);
  // eval mode: running statistics must not move either
  auto bufs_after = model.named_buffers();
  for (size_t i = 0; i < bufs_after.size(); ++i) CHECK(bufs_after[i].second.vec() == buf_vals[i]);

  Tensor wrong = random_tensor({2, 3, 64, 64}, rng, 0, 1);
  CHECK_THROWS_AS(extract_features(model, wrong), DimError);
}

TEST_CASE("checkpoint and model feature extraction agree") {
  SynthSpec spec;
  spec.n_classes = 2;
  spec.n_samples = 2;
  spec.image_size = 32;
  spec.seed = 4;
  SynthDataset ds = generate_synthetic(spec);
  TrainConfig cfg;
  cfg.encoder = ImageEncoderConfig{8, 16, 1, 32};
  cfg.batch_size = 2;
  cfg.epochs = 1;
  cfg.d_t = 8;
  cfg.log_every = 0;
  TextEncoder te = make_text_encoder(cfg, ds.vocab);
  Checkpoint ckpt = pretrain(cfg, ds.records, te).checkpoint;

  Rng rng(5);
  Tensor images = random_tensor({3, 3, 32, 32}, rng, 0, 1);
  Model model = model_from_checkpoint(ckpt);
  CHECK(extract_features(ckpt, images).vec() == extract_features(model, images).vec());
}

TEST_CASE("linear probe separates linearly separable data") {
  Rng rng(6);
  const int64_t N = 200, D = 4;
  Tensor features = random_tensor({N, D}, rng, -1, 1);
  std::vector<double> w{0.7, -0.3, 0.5, 0.2};
  std::vector<std::vector<int>> labels;
  for (int64_t i = 0; i < N; ++i) {
    double s = 0;
    for (int64_t d = 0; d < D; ++d) s += w[static_cast<size_t>(d)] * features.data()[i * D + d];
    labels.push_back({s > 0 ? 1 : 0});
  }
  ProbeConfig cfg;
  cfg.epochs = 100;
  cfg.lr = 5e-2;
  cfg.batch_size = 50;
  cfg.seed = 7;
  Probe probe = train_probe(features, labels, 2, cfg);
  MetricReport rep = evaluate(probe, features, labels, ProbeTask::kSingleLabel);
  CHECK(rep.top1 >= 0.99);
}

TEST_CASE("zero training epochs leave the probe at its seeded init") {
  Rng rng(8);
  Tensor features = random_tensor({10, 3}, rng);
  std::vector<std::vector<int>> labels;
  for (int i = 0; i < 10; ++i) labels.push_back({i % 2});
  ProbeConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  Probe a = train_probe(features, labels, 2, cfg);
  Probe b = train_probe(features, labels, 2, cfg);
  CHECK(a.head.weight.vec() == b.head.weight.vec());
  CHECK(a.head.bias.vec() == b.head.bias.vec());

  cfg.epochs = 5;
  Probe trained = train_probe(features, labels, 2, cfg);
  CHECK(trained.head.weight.vec() != a.head.weight.vec());
  // same seed and epochs -> identical trained probe
  Probe trained2 = train_probe(features, labels, 2, cfg);
  CHECK(trained.head.weight.vec() == trained2.head.weight.vec());
  CHECK(trained.head.bias.vec() == trained2.head.bias.vec());
}

TEST_CASE("mlp probe has a hidden layer and still trains deterministically") {
  Rng rng(10);
  Tensor features = random_tensor({20, 4}, rng);
  std::vector<std::vector<int>> labels;
  for (int i = 0; i < 20; ++i) labels.push_back({i % 3});
  ProbeConfig cfg;
  cfg.kind = ProbeKind::kMlp;
  cfg.epochs = 3;
  cfg.seed = 11;
  Probe a = train_probe(features, labels, 3, cfg);
  Probe b = train_probe(features, labels, 3, cfg);
  CHECK(a.hidden.weight.shape() == Shape{4, 4});
  CHECK(a.head.weight.shape() == Shape{3, 4});
  CHECK(a.hidden.weight.vec() == b.hidden.weight.vec());
  CHECK(a.head.weight.vec() == b.head.weight.vec());
}

TEST_CASE("perfect multi-label predictions score 1 on every metric") {
  const int64_t N = 6, C = 3;
  Rng rng(12);
  std::vector<std::vector<int>> labels;
  Tensor features({N, C});
  for (int64_t i = 0; i < N; ++i) {
    std::vector<int> active{static_cast<int>(i % C)};
    if (i % 2 == 0) active.push_back(static_cast<int>((i + 1) % C));
    labels.push_back(active);
    for (int64_t c = 0; c < C; ++c) features.data()[i * C + c] = -1.0;
    for (int c : active) features.data()[i * C + c] = 1.0;
  }
  Probe probe = identity_probe(C, ProbeTask::kMultiLabel);
  MetricReport rep = evaluate(probe, features, labels, ProbeTask::kMultiLabel);
  CHECK(rep.f1_sample == 1.0);
  CHECK(rep.f1_micro == 1.0);
  CHECK(rep.f1_macro == 1.0);
  CHECK(rep.f1_weighted == 1.0);
}

TEST_CASE("all-negative predictions score 0") {
  const int64_t N = 5, C = 4;
  std::vector<std::vector<bool>> truth(N, std::vector<bool>(C, false));
  for (int64_t i = 0; i < N; ++i) truth[static_cast<size_t>(i)][static_cast<size_t>(i % C)] = true;
  std::vector<std::vector<bool>> pred(N, std::vector<bool>(C, false));
  MetricReport rep = multilabel_f1(pred, truth);
  CHECK(rep.f1_sample == 0.0);
  CHECK(rep.f1_micro == 0.0);
  CHECK(rep.f1_macro == 0.0);
  CHECK(rep.f1_weighted == 0.0);
}

TEST_CASE("hand-worked four-example case") {
  // N=4, C=3
  std::vector<std::vector<bool>> truth = {{true, false, false},
                                          {true, true, false},
                                          {false, false, true},
                                          {false, true, true}};
  std::vector<std::vector<bool>> pred = {{true, false, true},
                                         {true, false, false},
                                         {false, false, true},
                                         {false, false, false}};
  MetricReport rep = multilabel_f1(pred, truth);
  // sample: 2/3, 2/3, 1, 0 -> mean = 7/12
  CHECK(rep.f1_sample == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
  // micro: tp=3 fp=1 fn=3 -> 6/10
  CHECK(rep.f1_micro == doctest::Approx(0.6).epsilon(1e-12));
  // class f1: c0 tp2 fp0 fn0 -> 1; c1 tp0 fp0 fn2 -> 0; c2 tp1 fp1 fn1 -> 0.5
  CHECK(rep.f1_macro == doctest::Approx(0.5).epsilon(1e-12));
  // weighted by supports 2,2,2 -> (1*2 + 0*2 + 0.5*2)/6 = 0.5
  CHECK(rep.f1_weighted == doctest::Approx(0.5).epsilon(1e-12));
  check_report(rep, testutil::oracle_f1(pred, truth));
}

TEST_CASE("multilabel_f1 agrees with the oracle on random cases") {
  Rng rng(13);
  for (int rep_i = 0; rep_i < 100; ++rep_i) {
    const int64_t N = 1 + rng.uniform_int(12), C = 2 + rng.uniform_int(5);
    auto pred = random_bits(N, C, rng);
    auto truth = random_bits(N, C, rng);
    check_report(multilabel_f1(pred, truth), testutil::oracle_f1(pred, truth));
  }
}

TEST_CASE("evaluate reaches the same metrics through the probe path") {
  Rng rng(14);
  for (int rep_i = 0; rep_i < 20; ++rep_i) {
    const int64_t N = 2 + rng.uniform_int(8), C = 2 + rng.uniform_int(4);
    auto pred = random_bits(N, C, rng);
    auto truth_bits = random_bits(N, C, rng);
    // ensure every sample has at least one true label (labels must be non-empty)
    std::vector<std::vector<int>> labels(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) {
      for (int64_t c = 0; c < C; ++c)
        if (truth_bits[static_cast<size_t>(i)][static_cast<size_t>(c)])
          labels[static_cast<size_t>(i)].push_back(static_cast<int>(c));
      if (labels[static_cast<size_t>(i)].empty()) {
        labels[static_cast<size_t>(i)].push_back(0);
        truth_bits[static_cast<size_t>(i)][0] = true;
      }
    }
    Tensor features({N, C});
    for (int64_t i = 0; i < N; ++i)
      for (int64_t c = 0; c < C; ++c)
        features.data()[i * C + c] = pred[static_cast<size_t>(i)][static_cast<size_t>(c)] ? 1.0 : -1.0;
    Probe probe = identity_probe(C, ProbeTask::kMultiLabel);
    check_report(evaluate(probe, features, labels, ProbeTask::kMultiLabel),
                 testutil::oracle_f1(pred, truth_bits));
  }
}

TEST_CASE("evaluate is invariant under sample permutation") {
  Rng rng(15);
  const int64_t N = 12, C = 3;
  Tensor features = random_tensor({N, C}, rng, -2, 2);
  std::vector<std::vector<int>> labels;
  for (int64_t i = 0; i < N; ++i) labels.push_back({static_cast<int>(rng.uniform_int(C))});
  Probe probe = identity_probe(C, ProbeTask::kSingleLabel);
  MetricReport base = evaluate(probe, features, labels, ProbeTask::kSingleLabel);

  std::vector<int64_t> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  Tensor pf({N, C});
  std::vector<std::vector<int>> pl(static_cast<size_t>(N));
  for (int64_t i = 0; i < N; ++i) {
    std::copy(features.data() + perm[static_cast<size_t>(i)] * C,
              features.data() + (perm[static_cast<size_t>(i)] + 1) * C, pf.data() + i * C);
    pl[static_cast<size_t>(i)] = labels[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  }
  CHECK(evaluate(probe, pf, pl, ProbeTask::kSingleLabel).top1 == base.top1);
}

TEST_CASE("probe validation and enum parsing") {
  CHECK(probe_kind_from_string("linear") == ProbeKind::kLinear);
  CHECK(probe_kind_from_string("mlp") == ProbeKind::kMlp);
  CHECK_THROWS_AS(probe_kind_from_string("quadratic"), ConfigError);
  CHECK(probe_task_from_string("single_label") == ProbeTask::kSingleLabel);
  CHECK(probe_task_from_string("multi_label") == ProbeTask::kMultiLabel);
  CHECK_THROWS_AS(probe_task_from_string("ranking"), ConfigError);

  ProbeConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ProbeConfig{};
  bad.epochs = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  Rng rng(16);
  Tensor features = random_tensor({4, 2}, rng);
  ProbeConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_probe(features, {{0}, {0}, {0}, {0}}, 2, cfg), DimError);  // one class
  CHECK_THROWS_AS(train_probe(features, {{0}, {1}, {0}, {5}}, 2, cfg), DimError);  // out of range
  CHECK_THROWS_AS(train_probe(features, {{0}, {1}}, 2, cfg), DimError);            // count mismatch
}

TEST_CASE("metric report serialization") {
  MetricReport rep;
  rep.top1 = 0.75;
  rep.f1_micro = 0.5;
  const std::string j = rep.to_json();
  CHECK(j.find("\"top1\"") != std::string::npos);
  CHECK(j.find("0.75") != std::string::npos);
  CHECK(rep.to_table(ProbeTask::kSingleLabel).find("top1") != std::string::npos);
  CHECK(rep.to_table(ProbeTask::kMultiLabel).find("f1_macro") != std::string::npos);
}

}  // TEST_SUITE
