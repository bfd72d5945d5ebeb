#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "tvssl/data.hpp"

using namespace tvssl;
using testutil::random_tensor;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_manifest_lines(const fs::path& dir, const std::vector<std::string>& lines) {
  std::ofstream out(dir / "manifest.jsonl");
  for (const std::string& l : lines) out << l << '\n';
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("png round-trip within quantization error") {
  TempDir dir("tvssl_png_test");
  Rng rng(1);
  Tensor img = random_tensor({3, 12, 9}, rng, 0, 1);
  const std::string path = (dir.path / "a.png").string();
  write_png(path, img);
  Tensor back = read_png(path);
  REQUIRE(back.shape() == Shape{3, 12, 9});
  for (int64_t i = 0; i < img.numel(); ++i)
    CHECK(std::fabs(back.data()[i] - img.data()[i]) <= 0.5 / 255.0 + 1e-12);

  CHECK_THROWS_AS(read_png((dir.path / "missing.png").string()), IoError);
  Tensor bad({1, 4, 4});
  CHECK_THROWS_AS(write_png((dir.path / "b.png").string(), bad), DimError);
}

TEST_CASE("read_png rejects undecodable files") {
  TempDir dir("tvssl_png_bad");
  const std::string path = (dir.path / "junk.png").string();
  std::ofstream(path) << "this is not a png";
  CHECK_THROWS_AS(read_png(path), IoError);
}

TEST_CASE("manifest loads records in file order") {
  TempDir dir("tvssl_manifest_ok");
  Rng rng(2);
  for (int i = 0; i < 3; ++i)
    write_png((dir.path / ("i" + std::to_string(i) + ".png")).string(),
              random_tensor({3, 8, 8}, rng, 0, 1));
  write_manifest_lines(dir.path, {
      R"({"image": "i0.png", "caption": "Red Square!", "labels": [0]})",
      R"({"image": "i1.png", "caption": "two blue circles", "labels": [1, 2]})",
      R"({"image": "i2.png", "caption": "green triangle"})",
  });
  Vocab vocab;
  auto recs = load_manifest((dir.path / "manifest.jsonl").string(), vocab);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].tokens == std::vector<int>{vocab.lookup_frozen("red"), vocab.lookup_frozen("square")});
  CHECK(recs[1].tokens.size() == 3);
  CHECK(recs[0].labels == std::vector<int>{0});
  CHECK(recs[1].labels == std::vector<int>{1, 2});
  CHECK(recs[2].labels.empty());
  CHECK(recs[2].image.shape() == Shape{3, 8, 8});
}

TEST_CASE("one empty caption of three is rejected with the rest kept") {
  TempDir dir("tvssl_manifest_rej1");
  Rng rng(3);
  for (int i = 0; i < 3; ++i)
    write_png((dir.path / ("i" + std::to_string(i) + ".png")).string(),
              random_tensor({3, 8, 8}, rng, 0, 1));
  write_manifest_lines(dir.path, {
      R"({"image": "i0.png", "caption": "a dog"})",
      R"({"image": "i1.png", "caption": " ,.! "})",
      R"({"image": "i2.png", "caption": "a cat"})",
  });
  Vocab vocab;
  auto recs = load_manifest((dir.path / "manifest.jsonl").string(), vocab);
  CHECK(recs.size() == 2);
}

TEST_CASE("too many rejected captions abort the load") {
  TempDir dir("tvssl_manifest_rej2");
  Rng rng(4);
  for (int i = 0; i < 3; ++i)
    write_png((dir.path / ("i" + std::to_string(i) + ".png")).string(),
              random_tensor({3, 8, 8}, rng, 0, 1));
  write_manifest_lines(dir.path, {
      R"({"image": "i0.png", "caption": ""})",
      R"({"image": "i1.png", "caption": ""})",
      R"({"image": "i2.png", "caption": "fine"})",
  });
  Vocab vocab;
  CHECK_THROWS_AS(load_manifest((dir.path / "manifest.jsonl").string(), vocab), IoError);
}

TEST_CASE("malformed manifest lines and missing files raise io errors") {
  TempDir dir("tvssl_manifest_bad");
  write_manifest_lines(dir.path, {"not json at all"});
  Vocab vocab;
  CHECK_THROWS_AS(load_manifest((dir.path / "manifest.jsonl").string(), vocab), IoError);
  CHECK_THROWS_AS(load_manifest((dir.path / "no_such.jsonl").string(), vocab), IoError);
}

TEST_CASE("write_dataset then load_manifest round-trips tokens as words") {
  TempDir dir("tvssl_roundtrip");
  SynthSpec spec;
  spec.n_classes = 4;
  spec.n_samples = 8;
  spec.image_size = 8;
  spec.caption_len = 3;
  spec.seed = 5;
  SynthDataset ds = generate_synthetic(spec);
  write_dataset(ds, dir.path.string());

  Vocab loaded_vocab;
  auto recs = load_manifest((dir.path / "manifest.jsonl").string(), loaded_vocab);
  REQUIRE(recs.size() == ds.records.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    REQUIRE(recs[i].tokens.size() == ds.records[i].tokens.size());
    for (size_t t = 0; t < recs[i].tokens.size(); ++t)
      CHECK(loaded_vocab.word(recs[i].tokens[t]) == ds.vocab.word(ds.records[i].tokens[t]));
    CHECK(recs[i].labels == ds.records[i].labels);
    // pixels survive up to 8-bit quantization
    for (int64_t p = 0; p < recs[i].image.numel(); ++p)
      CHECK(std::fabs(recs[i].image.data()[p] - ds.records[i].image.data()[p]) <=
            0.5 / 255.0 + 1e-12);
  }
}

TEST_CASE("make_batches drops the trailing short batch") {
  auto batches = make_batches(10, 4, 3, 0);
  REQUIRE(batches.size() == 2);
  std::set<size_t> seen;
  for (const auto& b : batches) {
    CHECK(b.size() == 4);
    for (size_t i : b) {
      CHECK(i < 10);
      CHECK(seen.insert(i).second);  // no repeats across the epoch
    }
  }
  CHECK(make_batches(8, 4, 3, 0).size() == 2);
  CHECK(make_batches(3, 4, 3, 0).empty());
}

TEST_CASE("make_batches is keyed by (seed, epoch)") {
  CHECK(make_batches(64, 8, 1, 0) == make_batches(64, 8, 1, 0));
  CHECK(make_batches(64, 8, 1, 0) != make_batches(64, 8, 1, 1));
  CHECK(make_batches(64, 8, 1, 0) != make_batches(64, 8, 2, 0));
  CHECK_THROWS_AS(make_batches(10, 1, 0, 0), DimError);
  CHECK_THROWS_AS(make_batches(1, 2, 0, 0), DimError);
}

TEST_CASE("synthetic generation is deterministic and class-balanced") {
  SynthSpec spec;
  spec.n_classes = 5;
  spec.n_samples = 20;
  spec.image_size = 8;
  spec.seed = 9;
  SynthDataset a = generate_synthetic(spec);
  SynthDataset b = generate_synthetic(spec);
  REQUIRE(a.records.size() == 20);
  std::vector<int> counts(5, 0);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].image.vec() == b.records[i].image.vec());
    CHECK(a.records[i].tokens == b.records[i].tokens);
    REQUIRE(a.records[i].labels.size() == 1);
    CHECK(a.records[i].labels[0] >= 0);
    CHECK(a.records[i].labels[0] < 5);
    ++counts[static_cast<size_t>(a.records[i].labels[0])];
    for (int64_t p = 0; p < a.records[i].image.numel(); ++p) {
      CHECK(a.records[i].image.data()[p] >= 0.0);
      CHECK(a.records[i].image.data()[p] <= 1.0);
    }
  }
  for (int c : counts) CHECK(c == 4);

  SynthSpec bad = spec;
  bad.n_classes = 55;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad = spec;
  bad.overlap = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("overlap 1 captions only use the class attribute words") {
  SynthSpec spec;
  spec.n_classes = 10;
  spec.n_samples = 50;
  spec.image_size = 8;
  spec.overlap = 1.0;
  spec.seed = 10;
  SynthDataset ds = generate_synthetic(spec);
  const std::set<std::string> attrs = {"square", "circle",  "triangle", "red",
                                       "green",  "blue",    "yellow",   "magenta",
                                       "cyan",   "one",     "two",      "three"};
  for (const PairRecord& rec : ds.records) {
    // at most 3 distinct attribute words per class
    std::set<int> distinct(rec.tokens.begin(), rec.tokens.end());
    CHECK(distinct.size() <= 3);
    for (int t : rec.tokens) CHECK(attrs.count(ds.vocab.word(t)) == 1);
  }
}

TEST_CASE("overlap 0 captions carry no information about the class") {
  SynthSpec spec;
  spec.n_classes = 10;
  spec.n_samples = 5000;
  spec.image_size = 8;
  spec.overlap = 0.0;
  spec.caption_len = 8;
  spec.seed = 11;
  SynthDataset ds = generate_synthetic(spec);

  // plug-in mutual information between class and caption token, in nats
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pc, pt;
  double n = 0;
  for (const PairRecord& rec : ds.records)
    for (int t : rec.tokens) {
      joint[{rec.labels[0], t}] += 1;
      pc[rec.labels[0]] += 1;
      pt[t] += 1;
      n += 1;
    }
  double mi = 0.0;
  for (const auto& [ct, cnt] : joint) {
    const double pj = cnt / n;
    mi += pj * std::log(pj / ((pc[ct.first] / n) * (pt[ct.second] / n)));
  }
  CHECK(mi >= 0.0);
  CHECK(mi < 0.01);
}

}  // TEST_SUITE
