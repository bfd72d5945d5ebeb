#include <omp.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tvssl/experiments.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tvssl;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string content_hash(const std::string& path) {
  const std::string bytes = read_file(path);
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

struct RunContext {
  std::string verb;
  std::string config_path;
  std::string out_dir;
  json config;                       // parsed config file
  json input_hashes = json::object();
};

void write_run_manifest(const RunContext& ctx) {
  json j{{"verb", ctx.verb},
         {"config", ctx.config},
         {"inputs", ctx.input_hashes}};
  std::ofstream out(fs::path(ctx.out_dir) / "run_manifest.json");
  if (!out) throw IoError("cannot write run manifest under " + ctx.out_dir);
  out << j.dump(2) << "\n";
}

SynthSpec synth_spec_from(const json& cfg) {
  SynthSpec s;
  if (cfg.contains("synth")) {
    const auto& j = cfg["synth"];
    s.n_classes = j.value("n_classes", s.n_classes);
    s.n_samples = j.value("n_samples", s.n_samples);
    s.image_size = j.value("image_size", s.image_size);
    s.overlap = j.value("overlap", s.overlap);
    s.caption_len = j.value("caption_len", s.caption_len);
    s.seed = j.value("seed", s.seed);
  }
  s.validate();
  return s;
}

ProbeConfig probe_config_from(const json& cfg) {
  ProbeConfig p;
  if (cfg.contains("probe")) {
    const auto& j = cfg["probe"];
    if (j.contains("kind")) p.kind = probe_kind_from_string(j["kind"].get<std::string>());
    if (j.contains("task")) p.task = probe_task_from_string(j["task"].get<std::string>());
    p.epochs = j.value("epochs", p.epochs);
    p.lr = j.value("lr", p.lr);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.seed = j.value("seed", p.seed);
  }
  p.validate();
  return p;
}

std::string manifest_path_from(const json& cfg, const std::string& config_path) {
  if (!cfg.contains("data") || !cfg["data"].contains("manifest"))
    throw ConfigError("config needs data.manifest");
  fs::path p = cfg["data"]["manifest"].get<std::string>();
  if (p.is_relative()) p = fs::path(config_path).parent_path() / p;
  return p.string();
}

int run_gen_synth(RunContext& ctx, std::optional<uint64_t> seed_override) {
  SynthSpec spec = synth_spec_from(ctx.config);
  if (seed_override) spec.seed = *seed_override;
  SynthDataset ds = generate_synthetic(spec);
  const std::string dir = (fs::path(ctx.out_dir) / "dataset").string();
  write_dataset(ds, dir);
  std::cerr << "wrote " << ds.records.size() << " records to " << dir << "\n";
  write_run_manifest(ctx);
  return 0;
}

int run_pretrain(RunContext& ctx, std::optional<uint64_t> seed_override) {
  TrainConfig cfg = train_config_from_json(ctx.config.dump());
  if (seed_override) cfg.seed = *seed_override;
  const std::string manifest = manifest_path_from(ctx.config, ctx.config_path);
  ctx.input_hashes[manifest] = content_hash(manifest);

  Vocab vocab;
  std::vector<PairRecord> records = load_manifest(manifest, vocab);
  vocab.freeze();
  TextEncoder tenc = make_text_encoder(cfg, vocab);
  PretrainResult result = pretrain(cfg, records, tenc);

  save_checkpoint(result.checkpoint, (fs::path(ctx.out_dir) / "checkpoint.bin").string());
  write_history_csv((fs::path(ctx.out_dir) / "loss_history.csv").string(), result.history);
  write_run_manifest(ctx);
  std::cerr << "pretrained " << result.history.size() << " steps\n";
  return 0;
}

int run_probe(RunContext& ctx, const std::string& checkpoint_flag,
              std::optional<uint64_t> seed_override) {
  std::string ckpt_path = checkpoint_flag;
  if (ckpt_path.empty() && ctx.config.contains("probe"))
    ckpt_path = ctx.config["probe"].value("checkpoint", "");
  if (ckpt_path.empty()) throw ConfigError("probe needs --checkpoint or probe.checkpoint");
  ProbeConfig pcfg = probe_config_from(ctx.config);
  if (seed_override) pcfg.seed = *seed_override;

  const std::string manifest = manifest_path_from(ctx.config, ctx.config_path);
  ctx.input_hashes[manifest] = content_hash(manifest);
  ctx.input_hashes[ckpt_path] = content_hash(ckpt_path);

  Vocab vocab;
  std::vector<PairRecord> records = load_manifest(manifest, vocab);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const MetricReport rep = probe_checkpoint(ckpt, records, pcfg);

  std::ofstream((fs::path(ctx.out_dir) / "metrics.json").string()) << rep.to_json() << "\n";
  std::ofstream((fs::path(ctx.out_dir) / "metrics.txt").string()) << rep.to_table(pcfg.task);
  write_run_manifest(ctx);
  std::cerr << rep.to_table(pcfg.task);
  return 0;
}

int run_ablate(RunContext& ctx, std::optional<uint64_t> seed_override) {
  TrainConfig base = train_config_from_json(ctx.config.dump());
  ProbeConfig pcfg = probe_config_from(ctx.config);
  std::vector<uint64_t> seeds{0, 1, 2};
  if (ctx.config.contains("ablate") && ctx.config["ablate"].contains("seeds"))
    seeds = ctx.config["ablate"]["seeds"].get<std::vector<uint64_t>>();
  if (seed_override) seeds = {*seed_override};

  const std::string manifest = manifest_path_from(ctx.config, ctx.config_path);
  ctx.input_hashes[manifest] = content_hash(manifest);
  Vocab vocab;
  std::vector<PairRecord> records = load_manifest(manifest, vocab);
  vocab.freeze();

  const auto rows = run_ablation_grid(base, pcfg, records, vocab, seeds);
  write_ablation_csv((fs::path(ctx.out_dir) / "ablation.csv").string(), rows);
  std::ofstream((fs::path(ctx.out_dir) / "ablation.txt").string()) << ablation_table(rows);
  write_run_manifest(ctx);
  std::cout << ablation_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"text-enhanced visual self-supervised pretraining"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path;
  std::optional<uint64_t> seed_override;
  bool deterministic = false;

  app.add_option("--config", config_path, "JSON run config")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed_override, "seed override (flag > config > default)");
  app.add_option("--checkpoint", checkpoint_path, "checkpoint path (probe)");
  app.add_flag("--deterministic", deterministic, "force single-threaded execution");

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic paired dataset");
  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  auto* prb = app.add_subcommand("probe", "frozen-encoder probe evaluation");
  auto* abl = app.add_subcommand("ablate", "run the six-variant ablation grid");
  // global flags may appear after the verb
  for (CLI::App* sub : {gen, pre, prb, abl}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // unknown verb / bad flags -> usage + exit 2
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  if (deterministic) omp_set_num_threads(1);

  RunContext ctx;
  ctx.verb = app.get_subcommands().front()->get_name();
  ctx.config_path = config_path;
  ctx.out_dir = out_dir;

  try {
    ctx.config = json::parse(read_file(config_path));
    ctx.input_hashes[config_path] = content_hash(config_path);
    std::filesystem::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_synth(ctx, seed_override);
    if (pre->parsed()) return run_pretrain(ctx, seed_override);
    if (prb->parsed()) return run_probe(ctx, checkpoint_path, seed_override);
    if (abl->parsed()) return run_ablate(ctx, seed_override);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
