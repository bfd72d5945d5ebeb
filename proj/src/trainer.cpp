#include "tvssl/trainer.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iostream>

#include "json.hpp"

using json = nlohmann::json;

namespace tvssl {

void TrainConfig::validate() const {
  encoder.validate();
  loss.validate();
  augment.validate();
  TVSSL_CHECK_CFG(batch_size >= 2, "batch_size must be >= 2");
  TVSSL_CHECK_CFG(epochs >= 1, "epochs must be >= 1");
  TVSSL_CHECK_CFG(lr > 0, "lr must be > 0");
  TVSSL_CHECK_CFG(d_t >= 1, "d_t must be >= 1");
}

std::string train_config_to_json(const TrainConfig& c) {
  json j{
      {"encoder",
       {{"ndf", c.encoder.ndf},
        {"nrkhs", c.encoder.nrkhs},
        {"ndepth", c.encoder.ndepth},
        {"input_size", c.encoder.input_size}}},
      {"loss",
       {{"alpha", c.loss.alpha},
        {"lambda_inter", c.loss.lambda_inter},
        {"inter_kind", to_string(c.loss.inter_kind)},
        {"use_local", c.loss.use_local},
        {"use_v2t", c.loss.use_v2t},
        {"use_bn", c.loss.use_bn}}},
      {"augment",
       {{"crop_scale_lo", c.augment.crop_scale_lo},
        {"crop_scale_hi", c.augment.crop_scale_hi},
        {"crop_aspect_lo", c.augment.crop_aspect_lo},
        {"crop_aspect_hi", c.augment.crop_aspect_hi},
        {"jitter_strength", c.augment.jitter_strength},
        {"grayscale_prob", c.augment.grayscale_prob}}},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps", c.eps},
      {"weight_decay", c.weight_decay},
      {"seed", c.seed},
      {"log_every", c.log_every},
      {"d_t", c.d_t},
      {"embedding_file", c.embedding_file},
  };
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
  TrainConfig c;
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    c.encoder.ndf = e.value("ndf", c.encoder.ndf);
    c.encoder.nrkhs = e.value("nrkhs", c.encoder.nrkhs);
    c.encoder.ndepth = e.value("ndepth", c.encoder.ndepth);
    c.encoder.input_size = e.value("input_size", c.encoder.input_size);
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    c.loss.alpha = l.value("alpha", c.loss.alpha);
    c.loss.lambda_inter = l.value("lambda_inter", c.loss.lambda_inter);
    if (l.contains("inter_kind"))
      c.loss.inter_kind = inter_kind_from_string(l["inter_kind"].get<std::string>());
    c.loss.use_local = l.value("use_local", c.loss.use_local);
    c.loss.use_v2t = l.value("use_v2t", c.loss.use_v2t);
    c.loss.use_bn = l.value("use_bn", c.loss.use_bn);
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    c.augment.crop_scale_lo = a.value("crop_scale_lo", c.augment.crop_scale_lo);
    c.augment.crop_scale_hi = a.value("crop_scale_hi", c.augment.crop_scale_hi);
    c.augment.crop_aspect_lo = a.value("crop_aspect_lo", c.augment.crop_aspect_lo);
    c.augment.crop_aspect_hi = a.value("crop_aspect_hi", c.augment.crop_aspect_hi);
    c.augment.jitter_strength = a.value("jitter_strength", c.augment.jitter_strength);
    c.augment.grayscale_prob = a.value("grayscale_prob", c.augment.grayscale_prob);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.log_every = j.value("log_every", c.log_every);
  c.d_t = j.value("d_t", c.d_t);
  c.embedding_file = j.value("embedding_file", c.embedding_file);
  c.validate();
  return c;
}

std::vector<Tensor> Model::parameters() {
  std::vector<Tensor> out = encoder.parameters();
  for (Tensor& t : heads.parameters()) out.push_back(t);
  return out;
}

nn::NamedTensors Model::named_parameters() {
  nn::NamedTensors out;
  for (auto& [n, t] : encoder.named_parameters()) out.emplace_back("encoder." + n, t);
  for (auto& [n, t] : heads.named_parameters()) out.emplace_back(n, t);
  return out;
}

nn::NamedTensors Model::named_buffers() {
  nn::NamedTensors out;
  for (auto& [n, t] : encoder.named_buffers()) out.emplace_back("encoder." + n, t);
  for (auto& [n, t] : heads.named_buffers()) out.emplace_back(n, t);
  return out;
}

Model build_model(const TrainConfig& cfg) {
  cfg.validate();
  Model m;
  m.encoder = ImageEncoder(cfg.encoder, cfg.seed);
  m.heads = ProjectionHeads(cfg.d_t, cfg.encoder.nrkhs, cfg.loss.use_bn, cfg.seed);
  return m;
}

namespace {

constexpr char kMagic[8] = {'T', 'V', 'C', 'K', 'P', 'T', '0', '1'};

void put_u32(std::string& s, uint32_t v) { s.append(reinterpret_cast<char*>(&v), 4); }
void put_i64(std::string& s, int64_t v) { s.append(reinterpret_cast<char*>(&v), 8); }
void put_u64(std::string& s, uint64_t v) { s.append(reinterpret_cast<char*>(&v), 8); }
void put_str(std::string& s, const std::string& v) {
  put_u32(s, static_cast<uint32_t>(v.size()));
  s.append(v);
}
void put_doubles(std::string& s, const double* d, size_t n) {
  s.append(reinterpret_cast<const char*>(d), n * sizeof(double));
}

struct Reader {
  const char* p;
  const char* end;
  void need(size_t n) const {
    if (p + n > end) throw IoError("truncated checkpoint payload");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, p, 4);
    p += 4;
    return v;
  }
  int64_t i64() {
    need(8);
    int64_t v;
    std::memcpy(&v, p, 8);
    p += 8;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, p, 8);
    p += 8;
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s(p, n);
    p += n;
    return s;
  }
  std::vector<double> doubles(size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), p, n * sizeof(double));
    p += n * sizeof(double);
    return v;
  }
};

void put_named(std::string& s, const nn::NamedTensors& ts) {
  put_u32(s, static_cast<uint32_t>(ts.size()));
  for (const auto& [name, t] : ts) {
    put_str(s, name);
    put_u32(s, static_cast<uint32_t>(t.ndim()));
    for (int64_t d : t.shape()) put_i64(s, d);
    put_doubles(s, t.data(), static_cast<size_t>(t.numel()));
  }
}

nn::NamedTensors read_named(Reader& r) {
  nn::NamedTensors out;
  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const uint32_t nd = r.u32();
    Shape shape(nd);
    for (uint32_t d = 0; d < nd; ++d) shape[d] = r.i64();
    std::vector<double> data = r.doubles(static_cast<size_t>(numel_of(shape)));
    out.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string payload;
  put_str(payload, train_config_to_json(ckpt.config));
  put_i64(payload, ckpt.epoch);
  put_i64(payload, ckpt.step);
  put_u64(payload, ckpt.rng_seed);
  put_named(payload, ckpt.params);
  put_named(payload, ckpt.buffers);
  put_u32(payload, static_cast<uint32_t>(ckpt.adam_m.size()));
  for (const auto& m : ckpt.adam_m) {
    put_u64(payload, m.size());
    put_doubles(payload, m.data(), m.size());
  }
  for (const auto& v : ckpt.adam_v) {
    put_u64(payload, v.size());
    put_doubles(payload, v.data(), v.size());
  }

  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t version = ckpt.version;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const uint64_t size = payload.size();
  out.write(reinterpret_cast<const char*>(&size), 8);
  out.write(reinterpret_cast<const char*>(&crc), 4);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  uint32_t version = 0, crc = 0;
  uint64_t size = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&size), 8);
  in.read(reinterpret_cast<char*>(&crc), 4);
  if (!in) throw IoError("truncated checkpoint header: " + path);
  if (version != 1) throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::string payload(size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(size));
  if (!in || static_cast<uint64_t>(in.gcount()) != size)
    throw IoError("truncated checkpoint payload: " + path);
  const uint32_t actual = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(size)));
  if (actual != crc) throw IoError("checkpoint checksum mismatch: " + path);

  Reader r{payload.data(), payload.data() + payload.size()};
  Checkpoint ckpt;
  ckpt.version = version;
  ckpt.config = train_config_from_json(r.str());
  ckpt.epoch = r.i64();
  ckpt.step = r.i64();
  ckpt.rng_seed = r.u64();
  ckpt.params = read_named(r);
  ckpt.buffers = read_named(r);
  const uint32_t np = r.u32();
  for (uint32_t i = 0; i < np; ++i) ckpt.adam_m.push_back(r.doubles(r.u64()));
  for (uint32_t i = 0; i < np; ++i) ckpt.adam_v.push_back(r.doubles(r.u64()));
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m = build_model(ckpt.config);
  auto copy_into = [](const nn::NamedTensors& src, nn::NamedTensors dst) {
    TVSSL_CHECK(src.size() == dst.size(), "checkpoint tensor count mismatch");
    for (size_t i = 0; i < src.size(); ++i) {
      TVSSL_CHECK(src[i].first == dst[i].first,
                  "checkpoint tensor name mismatch: " << src[i].first << " vs "
                                                      << dst[i].first);
      TVSSL_CHECK(src[i].second.shape() == dst[i].second.shape(),
                  "checkpoint tensor shape mismatch for " << src[i].first);
      std::copy(src[i].second.data(), src[i].second.data() + src[i].second.numel(),
                dst[i].second.data());
    }
  };
  copy_into(ckpt.params, m.named_parameters());
  copy_into(ckpt.buffers, m.named_buffers());
  return m;
}

void write_history_csv(const std::string& path, const std::vector<LossRow>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss history: " + path);
  out << "step,intra,inter,total\n";
  out.precision(17);
  for (const LossRow& r : history)
    out << r.step << ',' << r.intra << ',' << r.inter << ',' << r.total << '\n';
}

TextEncoder make_text_encoder(const TrainConfig& cfg, const Vocab& vocab) {
  if (!cfg.embedding_file.empty()) return TextEncoder::from_file(cfg.embedding_file);
  return TextEncoder::random_init(vocab, cfg.d_t, cfg.seed);
}

PretrainResult pretrain(const TrainConfig& cfg, const std::vector<PairRecord>& records,
                        const TextEncoder& text_encoder, const Checkpoint* resume) {
  cfg.validate();
  TVSSL_CHECK(!records.empty(), "pretrain: empty dataset");
  TVSSL_CHECK(static_cast<int64_t>(records.size()) >= cfg.batch_size,
              "pretrain: fewer records than batch_size");
  TVSSL_CHECK(text_encoder.d_t() == cfg.d_t,
              "text encoder dimension " << text_encoder.d_t() << " != config d_t " << cfg.d_t);

  Model model = resume ? model_from_checkpoint(*resume) : build_model(cfg);
  nn::AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
  nn::Adam adam(model.parameters(), adam_cfg);
  int64_t start_epoch = 0, step = 0;
  if (resume) {
    start_epoch = resume->epoch;
    step = resume->step;
    adam.set_step_count(resume->step);
    TVSSL_CHECK(resume->adam_m.size() == adam.params().size(),
                "checkpoint optimizer state mismatch");
    for (size_t i = 0; i < resume->adam_m.size(); ++i) {
      adam.moments_m()[i] = resume->adam_m[i];
      adam.moments_v()[i] = resume->adam_v[i];
    }
  }

  const int64_t B = cfg.batch_size;
  const int64_t S = cfg.encoder.input_size;
  PretrainResult result;

  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    AugmentPolicy policy = cfg.augment;
    policy.rng_seed = hash_combine(cfg.seed, static_cast<uint64_t>(epoch) + 0x415547ull);
    const auto batches = make_batches(records.size(), B, cfg.seed, epoch);

    for (const auto& batch : batches) {
      Tensor view1({B, 3, S, S}), view2({B, 3, S, S});
      std::vector<std::vector<int>> token_batch;
      token_batch.reserve(static_cast<size_t>(B));
      for (int64_t r = 0; r < B; ++r) {
        const PairRecord& rec = records[batch[static_cast<size_t>(r)]];
        auto [v1, v2] = sample_view_pair(policy, rec.image, batch[static_cast<size_t>(r)]);
        std::copy(v1.data(), v1.data() + v1.numel(), view1.data() + r * 3 * S * S);
        std::copy(v2.data(), v2.data() + v2.numel(), view2.data() + r * 3 * S * S);
        token_batch.push_back(rec.tokens);
      }
      Tensor text = text_encoder.encode_batch(token_batch);

      Tape tape;
      double intra_v, inter_v, total_v;
      {
        TapeScope scope(tape);
        MultiscaleFeatures feats1 = model.encoder.forward(view1, true);
        MultiscaleFeatures feats2 = model.encoder.forward(view2, true);
        Tensor intra = intra_infomax_loss(feats1, feats2);
        Tensor inter = cfg.loss.lambda_inter > 0
                           ? inter_modality_loss(model.heads, text, feats1, cfg.loss, true)
                           : Tensor::scalar(0.0);
        Tensor total = total_loss(intra, inter, cfg.loss);
        intra_v = intra.item();
        inter_v = inter.item();
        total_v = total.item();
        if (!std::isfinite(total_v)) {
          std::cerr << "non-finite loss at step " << step << ": intra=" << intra_v
                    << " inter=" << inter_v << "\n";
          throw NumericError("pretrain aborted on non-finite loss");
        }
        tape.backward(total);
      }
      adam.step();
      adam.zero_grad();
      ++step;
      result.history.push_back({step, intra_v, inter_v, total_v});
      if (cfg.log_every > 0 && step % cfg.log_every == 0)
        std::cerr << "step " << step << " intra " << intra_v << " inter " << inter_v
                  << " total " << total_v << "\n";
    }
  }

  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = cfg;
  ckpt.epoch = cfg.epochs;
  ckpt.step = step;
  ckpt.rng_seed = cfg.seed;
  for (auto& [n, t] : model.named_parameters()) ckpt.params.emplace_back(n, t.clone());
  for (auto& [n, t] : model.named_buffers()) ckpt.buffers.emplace_back(n, t.clone());
  ckpt.adam_m = adam.moments_m();
  ckpt.adam_v = adam.moments_v();
  return result;
}

}  // namespace tvssl
