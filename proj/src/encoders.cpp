#include "tvssl/encoders.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace tvssl {

void ImageEncoderConfig::validate() const {
  TVSSL_CHECK_CFG(ndf >= 8, "ndf must be >= 8, got " << ndf);
  TVSSL_CHECK_CFG(nrkhs >= ndf, "nrkhs must be >= ndf");
  TVSSL_CHECK_CFG(ndepth >= 1, "ndepth must be >= 1");
  TVSSL_CHECK_CFG(input_size == 32 || input_size == 64 || input_size == 128,
                  "input_size must be one of 32/64/128, got " << input_size);
}

namespace detail {

ResBlock::ResBlock(int64_t ch, Rng& rng)
    : c1(ch, ch, 3, 1, 1, rng), c2(ch, ch, 3, 1, 1, rng), b1(ch), b2(ch) {}

Tensor ResBlock::forward(const Tensor& x, bool training) {
  Tensor h = ops::relu(b1.forward(c1.forward(x), training));
  h = b2.forward(c2.forward(h), training);
  return ops::relu(ops::add(h, x));
}

void ResBlock::collect(const std::string& prefix, nn::NamedTensors& p,
                       nn::NamedTensors& b) {
  c1.collect(prefix + ".c1", p, b);
  c2.collect(prefix + ".c2", p, b);
  b1.collect(prefix + ".b1", p, b);
  b2.collect(prefix + ".b2", p, b);
}

Stage::Stage(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t pad,
             int64_t ndepth, Rng& rng)
    : down(in_ch, out_ch, k, stride, pad, rng), bn(out_ch) {
  blocks.reserve(static_cast<size_t>(ndepth));
  for (int64_t i = 0; i < ndepth; ++i) blocks.emplace_back(out_ch, rng);
}

Tensor Stage::forward(const Tensor& x, bool training) {
  Tensor h = ops::relu(bn.forward(down.forward(x), training));
  for (ResBlock& blk : blocks) h = blk.forward(h, training);
  return h;
}

void Stage::collect(const std::string& prefix, nn::NamedTensors& p,
                    nn::NamedTensors& b) {
  down.collect(prefix + ".down", p, b);
  bn.collect(prefix + ".bn", p, b);
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), p, b);
}

}  // namespace detail

ImageEncoder::ImageEncoder(const ImageEncoderConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng(mix64(seed));
  stem_ = nn::Conv2d(3, cfg.ndf, 3, 1, 1, rng);
  stem_bn_ = nn::BatchNorm(cfg.ndf);

  int64_t res = cfg.input_size;
  while (res > 8) {
    stages_.emplace_back(cfg.ndf, cfg.ndf, 3, 2, 1, cfg.ndepth, rng);
    res /= 2;
  }
  stages_.emplace_back(cfg.ndf, cfg.ndf, 2, 1, 0, cfg.ndepth, rng);  // 8 -> 7
  stages_.emplace_back(cfg.ndf, cfg.ndf, 3, 1, 0, cfg.ndepth, rng);  // 7 -> 5

  proj7_ = nn::Conv2d(cfg.ndf, cfg.nrkhs, 1, 1, 0, rng);
  proj5_ = nn::Conv2d(cfg.ndf, cfg.nrkhs, 1, 1, 0, rng);
  proj1_ = nn::Linear(cfg.ndf, cfg.nrkhs, rng);
}

MultiscaleFeatures ImageEncoder::forward(const Tensor& images, bool training) {
  TVSSL_CHECK(images.ndim() == 4 && images.dim(1) == 3, "encoder input must be [B,3,S,S]");
  TVSSL_CHECK(images.dim(2) == cfg_.input_size && images.dim(3) == cfg_.input_size,
              "encoder input size " << images.dim(2) << " != configured "
                                    << cfg_.input_size);
  Tensor h = ops::relu(stem_bn_.forward(stem_.forward(images), training));
  Tensor t7, t5;
  for (size_t i = 0; i < stages_.size(); ++i) {
    h = stages_[i].forward(h, training);
    if (i == stages_.size() - 2) t7 = h;
  }
  t5 = h;

  MultiscaleFeatures out;
  out.f7 = proj7_.forward(t7);
  out.f5 = proj5_.forward(t5);
  out.f1 = proj1_.forward(ops::spatial_mean(t5));
  return out;
}

std::vector<Tensor> ImageEncoder::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

nn::NamedTensors ImageEncoder::named_parameters() {
  nn::NamedTensors p, b;
  stem_.collect("stem", p, b);
  stem_bn_.collect("stem_bn", p, b);
  for (size_t i = 0; i < stages_.size(); ++i)
    stages_[i].collect("stage" + std::to_string(i), p, b);
  proj7_.collect("proj7", p, b);
  proj5_.collect("proj5", p, b);
  proj1_.collect("proj1", p, b);
  return p;
}

nn::NamedTensors ImageEncoder::named_buffers() {
  nn::NamedTensors p, b;
  stem_.collect("stem", p, b);
  stem_bn_.collect("stem_bn", p, b);
  for (size_t i = 0; i < stages_.size(); ++i)
    stages_[i].collect("stage" + std::to_string(i), p, b);
  proj7_.collect("proj7", p, b);
  proj5_.collect("proj5", p, b);
  proj1_.collect("proj1", p, b);
  return b;
}

ImageEncoder build_image_encoder(const ImageEncoderConfig& cfg, uint64_t seed) {
  return ImageEncoder(cfg, seed);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Vocab::Vocab() { words_.push_back("<unk>"); index_["<unk>"] = 0; }

int Vocab::lookup(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  if (frozen_) return 0;
  const int id = static_cast<int>(words_.size());
  words_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocab::lookup_frozen(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

TextEncoder TextEncoder::random_init(Vocab vocab, int64_t d_t, uint64_t seed) {
  TVSSL_CHECK_CFG(d_t >= 1, "text embedding dimension must be >= 1");
  TextEncoder enc;
  enc.vocab_ = std::move(vocab);
  enc.vocab_.freeze();
  enc.table_ = Tensor({enc.vocab_.size(), d_t});
  Rng rng(mix64(seed ^ 0x7e87a2u));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_t));
  // row 0 stays zero (UNK)
  for (int64_t i = d_t; i < enc.table_.numel(); ++i)
    enc.table_.data()[i] = scale * rng.normal();
  return enc;
}

TextEncoder TextEncoder::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding table: " + path);
  Vocab vocab;
  std::vector<std::vector<double>> rows;
  int64_t d_t = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (d_t < 0) d_t = static_cast<int64_t>(row.size());
    if (static_cast<int64_t>(row.size()) != d_t || d_t == 0)
      throw IoError("inconsistent embedding width in " + path);
    const int id = vocab.lookup(token);
    if (id == static_cast<int>(rows.size()) + 1) rows.push_back(std::move(row));
    // duplicate tokens keep their first row
  }
  if (rows.empty()) throw IoError("empty embedding table: " + path);

  TextEncoder enc;
  enc.vocab_ = std::move(vocab);
  enc.vocab_.freeze();
  enc.table_ = Tensor({enc.vocab_.size(), d_t});
  for (size_t r = 0; r < rows.size(); ++r)
    for (int64_t c = 0; c < d_t; ++c)
      enc.table_.data()[(static_cast<int64_t>(r) + 1) * d_t + c] = rows[r][static_cast<size_t>(c)];
  return enc;
}

Tensor TextEncoder::encode(const std::vector<int>& tokens) const {
  TVSSL_CHECK(!tokens.empty(), "encode_text: empty token sequence");
  const int64_t D = d_t();
  Tensor out({D});
  for (int tok : tokens) {
    TVSSL_CHECK(tok >= 0 && tok < vocab_.size(), "token index " << tok << " out of range");
    const double* row = table_.data() + static_cast<int64_t>(tok) * D;
    for (int64_t d = 0; d < D; ++d) out.data()[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (int64_t d = 0; d < D; ++d) out.data()[d] *= inv;
  return out;
}

Tensor TextEncoder::encode_batch(const std::vector<std::vector<int>>& token_batch) const {
  TVSSL_CHECK(!token_batch.empty(), "encode_batch: empty batch");
  const int64_t B = static_cast<int64_t>(token_batch.size()), D = d_t();
  Tensor out({B, D});
  for (int64_t b = 0; b < B; ++b) {
    Tensor row = encode(token_batch[static_cast<size_t>(b)]);
    std::copy(row.data(), row.data() + D, out.data() + b * D);
  }
  return out;
}

}  // namespace tvssl
