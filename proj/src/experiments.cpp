#include "tvssl/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace tvssl {

Split split_80_20(size_t n_records) {
  Split s;
  for (size_t i = 0; i < n_records; ++i)
    (i % 5 == 4 ? s.test : s.train).push_back(i);
  return s;
}

namespace {

Tensor stack_images(const std::vector<PairRecord>& records, const std::vector<size_t>& idx) {
  TVSSL_CHECK(!idx.empty(), "empty record selection");
  const Tensor& first = records[idx[0]].image;
  const int64_t S = first.dim(1);
  Tensor out({static_cast<int64_t>(idx.size()), 3, S, S});
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor& img = records[idx[i]].image;
    TVSSL_CHECK(img.shape() == first.shape(), "inconsistent image shapes in dataset");
    std::copy(img.data(), img.data() + img.numel(),
              out.data() + static_cast<int64_t>(i) * img.numel());
  }
  return out;
}

std::vector<std::vector<int>> gather_labels(const std::vector<PairRecord>& records,
                                            const std::vector<size_t>& idx) {
  std::vector<std::vector<int>> out;
  out.reserve(idx.size());
  for (size_t i : idx) {
    TVSSL_CHECK(!records[i].labels.empty(), "record " << i << " has no labels");
    out.push_back(records[i].labels);
  }
  return out;
}

int64_t count_classes(const std::vector<PairRecord>& records) {
  int maxc = 0;
  for (const PairRecord& r : records)
    for (int c : r.labels) maxc = std::max(maxc, c);
  return maxc + 1;
}

}  // namespace

MetricReport probe_checkpoint(const Checkpoint& ckpt,
                              const std::vector<PairRecord>& records,
                              const ProbeConfig& cfg) {
  Model model = model_from_checkpoint(ckpt);
  const Split split = split_80_20(records.size());
  const int64_t n_classes = count_classes(records);

  Tensor train_feats = extract_features(model, stack_images(records, split.train));
  Tensor test_feats = extract_features(model, stack_images(records, split.test));
  Probe probe =
      train_probe(train_feats, gather_labels(records, split.train), n_classes, cfg);
  return evaluate(probe, test_feats, gather_labels(records, split.test), cfg.task);
}

MetricReport pretrain_and_probe(const TrainConfig& cfg,
                                const std::vector<PairRecord>& records,
                                const Vocab& vocab, const ProbeConfig& probe_cfg) {
  TextEncoder tenc = make_text_encoder(cfg, vocab);
  PretrainResult result = pretrain(cfg, records, tenc);
  return probe_checkpoint(result.checkpoint, records, probe_cfg);
}

std::vector<AblationRow> run_ablation_grid(const TrainConfig& base,
                                           const ProbeConfig& probe_cfg,
                                           const std::vector<PairRecord>& records,
                                           const Vocab& vocab,
                                           const std::vector<uint64_t>& seeds) {
  TVSSL_CHECK(!seeds.empty(), "ablation grid needs at least one seed");
  struct Variant {
    const char* name;
    void (*apply)(LossConfig&);
  };
  const Variant variants[] = {
      {"baseline", [](LossConfig&) {}},
      {"wo_bn", [](LossConfig& l) { l.use_bn = false; }},
      {"wo_local", [](LossConfig& l) { l.use_local = false; }},
      {"wo_v2t", [](LossConfig& l) { l.use_v2t = false; }},
      {"nce_inter", [](LossConfig& l) { l.inter_kind = InterKind::kNce; }},
      {"intra_only", [](LossConfig& l) { l.lambda_inter = 0.0; }},
  };

  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    AblationRow row;
    row.variant = v.name;
    for (uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      v.apply(cfg.loss);
      const MetricReport rep = pretrain_and_probe(cfg, records, vocab, probe_cfg);
      const double score =
          probe_cfg.task == ProbeTask::kSingleLabel ? rep.top1 : rep.f1_macro;
      row.per_seed.push_back(score);
      std::cerr << "ablate " << row.variant << " seed " << seed << " -> " << score << "\n";
    }
    double sum = 0.0;
    for (double s : row.per_seed) sum += s;
    row.mean = sum / static_cast<double>(row.per_seed.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "variant      mean";
  if (!rows.empty())
    for (size_t i = 0; i < rows[0].per_seed.size(); ++i) os << "  seed" << i;
  os << "\n";
  for (const AblationRow& r : rows) {
    os << r.variant;
    for (size_t i = r.variant.size(); i < 13; ++i) os << ' ';
    os << r.mean;
    for (double s : r.per_seed) os << "  " << s;
    os << "\n";
  }
  return os.str();
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "variant,mean";
  if (!rows.empty())
    for (size_t i = 0; i < rows[0].per_seed.size(); ++i) out << ",seed" << i;
  out << "\n";
  out.precision(17);
  for (const AblationRow& r : rows) {
    out << r.variant << ',' << r.mean;
    for (double s : r.per_seed) out << ',' << s;
    out << "\n";
  }
}

}  // namespace tvssl
