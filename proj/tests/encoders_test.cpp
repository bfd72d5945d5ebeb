#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tvssl/encoders.hpp"

using namespace tvssl;
using testutil::random_tensor;

TEST_SUITE("encoders") {

TEST_CASE("config validation") {
  ImageEncoderConfig bad;
  bad.ndf = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ImageEncoderConfig{};
  bad.nrkhs = 4;  // < ndf
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ImageEncoderConfig{};
  bad.input_size = 48;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("same (config, seed) gives bit-identical parameters") {
  ImageEncoderConfig cfg{8, 16, 1, 32};
  ImageEncoder a(cfg, 7), b(cfg, 7);
  auto pa = a.named_parameters(), pb = b.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second.vec() == pb[i].second.vec());
  }
  ImageEncoder c(cfg, 8);
  CHECK(c.named_parameters()[0].second.vec() != pa[0].second.vec());
}

TEST_CASE("tap shape contract across input sizes") {
  for (int64_t size : {32, 64, 128}) {
    ImageEncoderConfig cfg{8, 16, 1, size};
    ImageEncoder enc(cfg, 1);
    Rng rng(static_cast<uint64_t>(size));
    Tensor x = random_tensor({2, 3, size, size}, rng, 0, 1);
    MultiscaleFeatures f = enc.forward(x, false);
    CHECK(f.f1.shape() == Shape{2, 16});
    CHECK(f.f5.shape() == Shape{2, 16, 5, 5});
    CHECK(f.f7.shape() == Shape{2, 16, 7, 7});
  }
}

TEST_CASE("paper-size configs keep the tap contract") {
  {
    ImageEncoderConfig cfg{64, 512, 1, 32};
    ImageEncoder enc(cfg, 2);
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 32, 32}, rng, 0, 1);
    MultiscaleFeatures f = enc.forward(x, false);
    CHECK(f.f1.shape() == Shape{2, 512});
    CHECK(f.f5.shape() == Shape{2, 512, 5, 5});
    CHECK(f.f7.shape() == Shape{2, 512, 7, 7});
  }
  {
    ImageEncoderConfig cfg{64, 512, 8, 128};
    ImageEncoder enc(cfg, 3);
    Rng rng(12);
    Tensor x = random_tensor({1, 3, 128, 128}, rng, 0, 1);
    MultiscaleFeatures f = enc.forward(x, false);
    CHECK(f.f7.shape() == Shape{1, 512, 7, 7});
  }
}

TEST_CASE("duplicated image gives identical rows; purity; sensitivity") {
  ImageEncoderConfig cfg{8, 16, 1, 32};
  ImageEncoder enc(cfg, 4);
  Rng rng(13);
  Tensor one = random_tensor({3, 32, 32}, rng, 0, 1);
  Tensor batch({2, 3, 32, 32});
  std::copy(one.data(), one.data() + one.numel(), batch.data());
  std::copy(one.data(), one.data() + one.numel(), batch.data() + one.numel());
  MultiscaleFeatures f = enc.forward(batch, false);
  for (int64_t d = 0; d < 16; ++d) CHECK(f.f1.data()[d] == f.f1.data()[16 + d]);
  for (int64_t i = 0; i < 16 * 25; ++i) CHECK(f.f5.data()[i] == f.f5.data()[16 * 25 + i]);

  MultiscaleFeatures f2 = enc.forward(batch, false);
  CHECK(f.f1.vec() == f2.f1.vec());  // deterministic

  Tensor batch2 = batch.clone();
  batch2.data()[5 * 32 + 17] += 0.25;  // one pixel
  MultiscaleFeatures f3 = enc.forward(batch2, false);
  CHECK(f.f1.vec() != f3.f1.vec());
}

TEST_CASE("encoder rejects wrong input size") {
  ImageEncoderConfig cfg{8, 16, 1, 32};
  ImageEncoder enc(cfg, 5);
  Tensor x({2, 3, 64, 64});
  CHECK_THROWS_AS(enc.forward(x, false), DimError);
}

TEST_CASE("tokenize lowercases and splits on punctuation") {
  auto t = tokenize("A red Square, and 2 circles!");
  CHECK(t == std::vector<std::string>{"a", "red", "square", "and", "2", "circles"});
  CHECK(tokenize("  ,.! ").empty());
}

TEST_CASE("vocab UNK and freeze semantics") {
  Vocab v;
  CHECK(v.size() == 1);  // reserved UNK
  CHECK(v.lookup("cat") == 1);
  CHECK(v.lookup("dog") == 2);
  CHECK(v.lookup("cat") == 1);
  v.freeze();
  CHECK(v.lookup("bird") == 0);  // maps to UNK once frozen
  CHECK(v.lookup_frozen("dog") == 2);
  CHECK(v.lookup_frozen("fish") == 0);
}

TEST_CASE("text encoder mean semantics") {
  Vocab v;
  const int a = v.lookup("a"), b = v.lookup("b");
  TextEncoder enc = TextEncoder::random_init(v, 4, 9);

  // single token -> its row
  Tensor ea = enc.encode({a});
  for (int64_t d = 0; d < 4; ++d) CHECK(ea.data()[d] == enc.table().data()[a * 4 + d]);

  // repetition is idempotent under the mean
  Tensor ea3 = enc.encode({a, a, a});
  for (int64_t d = 0; d < 4; ++d) CHECK(ea3.data()[d] == doctest::Approx(ea.data()[d]).epsilon(1e-15));

  // {a,b} -> elementwise (E[a]+E[b])/2
  Tensor eab = enc.encode({a, b});
  for (int64_t d = 0; d < 4; ++d) {
    const double want = 0.5 * (enc.table().data()[a * 4 + d] + enc.table().data()[b * 4 + d]);
    CHECK(eab.data()[d] == doctest::Approx(want).epsilon(1e-15));
  }

  // permutation invariance over the token multiset
  Tensor e1 = enc.encode({a, b, b});
  Tensor e2 = enc.encode({b, a, b});
  for (int64_t d = 0; d < 4; ++d) CHECK(e1.data()[d] == doctest::Approx(e2.data()[d]).epsilon(1e-15));

  CHECK_THROWS_AS(enc.encode({}), DimError);
  CHECK(enc.table().data()[0] == 0.0);  // UNK row zero
  CHECK_FALSE(enc.table().requires_grad());
}

TEST_CASE("text encoder from plain-text table") {
  const char* path = "embed_test_table.txt";
  {
    std::ofstream out(path);
    out << "cat 1.0 2.0\n";
    out << "dog -1.0 0.5\n";
  }
  TextEncoder enc = TextEncoder::from_file(path);
  CHECK(enc.d_t() == 2);
  Tensor e = enc.encode({enc.vocab().lookup_frozen("cat")});
  CHECK(e.data()[0] == 1.0);
  CHECK(e.data()[1] == 2.0);
  Tensor u = enc.encode({enc.vocab().lookup_frozen("mouse")});
  CHECK(u.data()[0] == 0.0);  // UNK row
  std::remove(path);
  CHECK_THROWS_AS(TextEncoder::from_file("no_such_table.txt"), IoError);
}

}  // TEST_SUITE
