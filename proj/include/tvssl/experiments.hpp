#ifndef TVSSL_EXPERIMENTS_HPP_
#define TVSSL_EXPERIMENTS_HPP_

#include <string>
#include <vector>

#include "tvssl/evalprobe.hpp"

namespace tvssl {

// deterministic 80/20 split: every 5th record is held out
struct Split {
  std::vector<size_t> train, test;
};
Split split_80_20(size_t n_records);

// Frozen-encoder probe protocol: extract f1 features for all records, train
// the probe on the 80% split, report metrics on the held-out 20%.
MetricReport probe_checkpoint(const Checkpoint& ckpt,
                              const std::vector<PairRecord>& records,
                              const ProbeConfig& cfg);

// pretrain with cfg (seed already set), then run the probe protocol
MetricReport pretrain_and_probe(const TrainConfig& cfg,
                                const std::vector<PairRecord>& records,
                                const Vocab& vocab, const ProbeConfig& probe_cfg);

struct AblationRow {
  std::string variant;
  std::vector<double> per_seed;  // top1 (single-label) per seed
  double mean = 0.0;
};

// The six-variant grid: baseline, w/o BN, w/o Local, w/o V2T, nce-inter,
// intra-only; identical seeds across variants.
std::vector<AblationRow> run_ablation_grid(const TrainConfig& base,
                                           const ProbeConfig& probe_cfg,
                                           const std::vector<PairRecord>& records,
                                           const Vocab& vocab,
                                           const std::vector<uint64_t>& seeds);

std::string ablation_table(const std::vector<AblationRow>& rows);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace tvssl

#endif  // TVSSL_EXPERIMENTS_HPP_
