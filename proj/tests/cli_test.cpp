// End-to-end checks of the command-line tool. The binary path comes in via
// the TVSSL_CLI compile definition.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TVSSL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t count_lines(const std::string& text) {
  size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

struct Workspace {
  fs::path root;
  Workspace() : root(fs::temp_directory_path() / "tvssl_cli_test") {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string file(const std::string& name, const json& content) const {
    const fs::path p = root / name;
    std::ofstream(p) << content.dump(2);
    return p.string();
  }
};

}  // namespace

TEST_CASE("cli pipeline: gen-synth, pretrain, probe, ablate") {
  Workspace ws;

  const json synth_cfg{{"synth",
                        {{"n_classes", 4},
                         {"n_samples", 8},
                         {"image_size", 32},
                         {"overlap", 1.0},
                         {"caption_len", 4},
                         {"seed", 1}}}};
  const std::string synth_path = ws.file("synth.json", synth_cfg);
  const fs::path data_out = ws.root / "data";
  REQUIRE(run_cli("gen-synth --config " + synth_path + " --out " + data_out.string()) == 0);
  const fs::path manifest = data_out / "dataset" / "manifest.jsonl";
  REQUIRE(fs::exists(manifest));
  CHECK(count_lines(slurp(manifest)) == 8);
  CHECK(fs::exists(data_out / "dataset" / "img_000000.png"));
  CHECK(fs::exists(data_out / "run_manifest.json"));
  const json run_manifest = json::parse(slurp(data_out / "run_manifest.json"));
  CHECK(run_manifest["verb"] == "gen-synth");
  CHECK(run_manifest.contains("inputs"));

  json train_cfg{{"encoder", {{"ndf", 8}, {"nrkhs", 16}, {"ndepth", 1}, {"input_size", 32}}},
                 {"batch_size", 4},
                 {"epochs", 1},
                 {"lr", 1e-3},
                 {"d_t", 8},
                 {"seed", 1},
                 {"log_every", 0},
                 {"data", {{"manifest", manifest.string()}}},
                 {"probe", {{"epochs", 3}, {"lr", 1e-2}, {"seed", 1}}},
                 {"ablate", {{"seeds", {0}}}}};
  const std::string train_path = ws.file("train.json", train_cfg);
  const fs::path pre_out = ws.root / "pre";
  REQUIRE(run_cli("pretrain --config " + train_path + " --out " + pre_out.string()) == 0);
  const fs::path ckpt = pre_out / "checkpoint.bin";
  REQUIRE(fs::exists(ckpt));
  const std::string hist = slurp(pre_out / "loss_history.csv");
  CHECK(hist.rfind("step,intra,inter,total\n", 0) == 0);
  CHECK(count_lines(hist) == 3);  // header + 2 steps

  const fs::path probe_out = ws.root / "probe";
  REQUIRE(run_cli("probe --config " + train_path + " --checkpoint " + ckpt.string() +
                  " --out " + probe_out.string()) == 0);
  const json metrics = json::parse(slurp(probe_out / "metrics.json"));
  CHECK(metrics.contains("top1"));
  CHECK(metrics["top1"].get<double>() >= 0.0);
  CHECK(metrics["top1"].get<double>() <= 1.0);
  CHECK(slurp(probe_out / "metrics.txt").find("top1") != std::string::npos);

  const fs::path abl_out = ws.root / "abl";
  REQUIRE(run_cli("ablate --config " + train_path + " --out " + abl_out.string()) == 0);
  const std::string table = slurp(abl_out / "ablation.csv");
  CHECK(count_lines(table) == 7);  // header + six variants
  for (const char* v : {"baseline", "wo_bn", "wo_local", "wo_v2t", "nce_inter", "intra_only"})
    CHECK(table.find(v) != std::string::npos);
}

TEST_CASE("cli determinism: same seed reproduces the checkpoint bytes") {
  Workspace ws;
  const json synth_cfg{{"synth",
                        {{"n_classes", 2},
                         {"n_samples", 4},
                         {"image_size", 32},
                         {"caption_len", 3},
                         {"seed", 2}}}};
  const std::string synth_path = ws.file("synth.json", synth_cfg);
  const fs::path data_out = ws.root / "data";
  REQUIRE(run_cli("gen-synth --config " + synth_path + " --out " + data_out.string()) == 0);

  json train_cfg{{"encoder", {{"ndf", 8}, {"nrkhs", 16}, {"ndepth", 1}, {"input_size", 32}}},
                 {"batch_size", 2},
                 {"epochs", 1},
                 {"d_t", 8},
                 {"log_every", 0},
                 {"data", {{"manifest", (data_out / "dataset" / "manifest.jsonl").string()}}}};
  const std::string train_path = ws.file("train.json", train_cfg);
  const fs::path a = ws.root / "a", b = ws.root / "b";
  REQUIRE(run_cli("pretrain --config " + train_path + " --out " + a.string() + " --seed 7") == 0);
  REQUIRE(run_cli("pretrain --config " + train_path + " --out " + b.string() + " --seed 7") == 0);
  CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
  CHECK(slurp(a / "loss_history.csv") == slurp(b / "loss_history.csv"));

  const fs::path c = ws.root / "c";
  REQUIRE(run_cli("pretrain --config " + train_path + " --out " + c.string() + " --seed 8") == 0);
  CHECK(slurp(a / "loss_history.csv") != slurp(c / "loss_history.csv"));
}

TEST_CASE("cli error handling and exit codes") {
  Workspace ws;
  const fs::path out = ws.root / "out";

  // parse errors -> 2
  CHECK(run_cli("frobnicate --config x.json --out " + out.string()) == 2);
  CHECK(run_cli("pretrain --out " + out.string()) == 2);  // missing required --config

  // unreadable / malformed config -> 2
  CHECK(run_cli("pretrain --config " + (ws.root / "missing.json").string() + " --out " +
                out.string()) == 2);
  const fs::path bad = ws.root / "bad.json";
  std::ofstream(bad) << "{ nope";
  CHECK(run_cli("pretrain --config " + bad.string() + " --out " + out.string()) == 2);

  // config that fails validation -> 2
  const std::string invalid = ws.file("invalid.json", json{{"batch_size", 1},
                                                           {"data", {{"manifest", "m.jsonl"}}}});
  CHECK(run_cli("pretrain --config " + invalid + " --out " + out.string()) == 2);

  // valid config, missing runtime input -> 1
  const std::string orphan = ws.file("orphan.json",
                                     json{{"data", {{"manifest", (ws.root / "none.jsonl").string()}}}});
  CHECK(run_cli("pretrain --config " + orphan + " --out " + out.string()) == 1);

  // probe without a checkpoint source -> 2
  const std::string noprobe = ws.file("noprobe.json",
                                      json{{"data", {{"manifest", (ws.root / "none.jsonl").string()}}}});
  CHECK(run_cli("probe --config " + noprobe + " --out " + out.string()) == 2);
}
