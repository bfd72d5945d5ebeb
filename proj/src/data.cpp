#include "tvssl/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace tvssl {

void write_png(const std::string& path, const Tensor& image) {
  TVSSL_CHECK(image.ndim() == 3 && image.dim(0) == 3, "write_png expects [3,H,W]");
  const int64_t H = image.dim(1), W = image.dim(2);
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(W) * 3);
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.data()[(c * H + y) * W + x], 0.0, 1.0);
        row[static_cast<size_t>(x * 3 + c)] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Tensor read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("undecodable image: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 W = png_get_image_width(png, info);
  const png_uint_32 H = png_get_image_height(png, info);
  // normalize any input to 8-bit RGB
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  std::vector<png_byte> row(static_cast<size_t>(W) * 3);
  Tensor out({3, static_cast<int64_t>(H), static_cast<int64_t>(W)});
  for (png_uint_32 y = 0; y < H; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        out.data()[(c * H + y) * W + x] =
            static_cast<double>(row[static_cast<size_t>(x * 3 + c)]) / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

std::vector<PairRecord> load_manifest(const std::string& path, Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest not found: " + path);
  const fs::path base = fs::path(path).parent_path();

  std::vector<PairRecord> records;
  size_t total = 0, rejected = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++total;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("bad manifest line " + std::to_string(total) + ": " + e.what());
    }
    const std::string caption = j.value("caption", "");
    std::vector<std::string> words = tokenize(caption);
    if (words.empty()) {
      std::cerr << "warning: rejecting record " << total << " (empty caption)\n";
      ++rejected;
      continue;
    }
    PairRecord rec;
    for (const std::string& w : words) rec.tokens.push_back(vocab.lookup(w));
    const std::string img = j.at("image").get<std::string>();
    rec.image = read_png((base / img).string());
    if (j.contains("labels")) {
      for (const auto& l : j["labels"]) rec.labels.push_back(l.get<int>());
      TVSSL_CHECK(!rec.labels.empty(), "record " << total << ": empty label list");
    }
    records.push_back(std::move(rec));
  }
  const size_t limit = std::max<size_t>(1, total / 100);
  if (rejected > limit)
    throw IoError("too many rejected records: " + std::to_string(rejected) + "/" +
                  std::to_string(total));
  return records;
}

std::vector<std::vector<size_t>> make_batches(size_t n_records, int64_t batch_size,
                                              uint64_t seed, int64_t epoch) {
  TVSSL_CHECK(batch_size >= 2, "batch_size must be >= 2");
  TVSSL_CHECK(n_records >= 2, "need at least 2 records");
  std::vector<size_t> order(n_records);
  for (size_t i = 0; i < n_records; ++i) order[i] = i;
  Rng rng(hash_combine(seed, static_cast<uint64_t>(epoch)));
  for (size_t i = n_records - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i) + 1))]);

  std::vector<std::vector<size_t>> batches;
  const size_t bs = static_cast<size_t>(batch_size);
  for (size_t start = 0; start + bs <= n_records; start += bs)
    batches.emplace_back(order.begin() + static_cast<ptrdiff_t>(start),
                         order.begin() + static_cast<ptrdiff_t>(start + bs));
  return batches;
}

namespace {

const char* kShapeWords[] = {"square", "circle", "triangle"};
const char* kColorWords[] = {"red", "green", "blue", "yellow", "magenta", "cyan"};
const char* kCountWords[] = {"one", "two", "three"};
const double kColorRgb[][3] = {{0.90, 0.15, 0.15}, {0.15, 0.85, 0.15}, {0.20, 0.25, 0.95},
                               {0.90, 0.85, 0.15}, {0.85, 0.20, 0.85}, {0.15, 0.85, 0.85}};
constexpr int kNumFiller = 32;

struct ClassAttrs {
  int shape, color, count;  // count in 1..3
};

ClassAttrs class_attrs(int cls) {
  return {cls % 3, (cls / 3) % 6, (cls / 18) % 3 + 1};
}

void draw_shape(Tensor& img, int shape, const double* rgb, double cx, double cy,
                double r, double brightness) {
  const int64_t S = img.dim(1);
  for (int64_t y = 0; y < S; ++y)
    for (int64_t x = 0; x < S; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      bool inside = false;
      switch (shape) {
        case 0:  // square
          inside = std::fabs(dx) <= r && std::fabs(dy) <= r;
          break;
        case 1:  // circle
          inside = dx * dx + dy * dy <= r * r;
          break;
        default:  // upward triangle
          inside = dy <= r && dy >= -r && std::fabs(dx) <= (dy + r) / 2.0;
          break;
      }
      if (inside)
        for (int c = 0; c < 3; ++c)
          img.data()[(c * S + y) * S + x] = std::clamp(rgb[c] * brightness, 0.0, 1.0);
    }
}

}  // namespace

void SynthSpec::validate() const {
  TVSSL_CHECK_CFG(n_classes >= 1 && n_classes <= 54,
                  "n_classes exceeds attribute-combination capacity (54)");
  TVSSL_CHECK_CFG(n_samples >= 1, "n_samples must be >= 1");
  TVSSL_CHECK_CFG(image_size >= 8, "image_size too small");
  TVSSL_CHECK_CFG(overlap >= 0 && overlap <= 1, "overlap must be in [0,1]");
  TVSSL_CHECK_CFG(caption_len >= 1, "caption_len must be >= 1");
}

Vocab synth_vocab() {
  Vocab v;
  for (const char* w : kShapeWords) v.lookup(w);
  for (const char* w : kColorWords) v.lookup(w);
  for (const char* w : kCountWords) v.lookup(w);
  for (int i = 0; i < kNumFiller; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    v.lookup(buf);
  }
  v.freeze();
  return v;
}

SynthDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthDataset ds;
  ds.vocab = synth_vocab();
  Rng rng(mix64(spec.seed ^ 0x53594eull));
  const int64_t S = spec.image_size;

  for (int i = 0; i < spec.n_samples; ++i) {
    const int cls = i % spec.n_classes;  // round-robin keeps classes balanced
    const ClassAttrs at = class_attrs(cls);

    PairRecord rec;
    rec.image = Tensor({3, S, S});
    for (int64_t p = 0; p < rec.image.numel(); ++p)
      rec.image.data()[p] = rng.uniform(0.0, 0.15);
    for (int k = 0; k < at.count; ++k) {
      const double r = rng.uniform(static_cast<double>(S) / 8.0, static_cast<double>(S) / 5.0);
      const double cx = rng.uniform(r, static_cast<double>(S) - 1.0 - r);
      const double cy = rng.uniform(r, static_cast<double>(S) - 1.0 - r);
      draw_shape(rec.image, at.shape, kColorRgb[at.color], cx, cy, r,
                 rng.uniform(0.8, 1.1));
    }

    const int attr_tokens[3] = {ds.vocab.lookup_frozen(kShapeWords[at.shape]),
                                ds.vocab.lookup_frozen(kColorWords[at.color]),
                                ds.vocab.lookup_frozen(kCountWords[at.count - 1])};
    for (int t = 0; t < spec.caption_len; ++t) {
      if (rng.uniform() < spec.overlap) {
        rec.tokens.push_back(attr_tokens[rng.uniform_int(3)]);
      } else {
        // skip the UNK row when drawing from the full vocabulary
        rec.tokens.push_back(1 + static_cast<int>(rng.uniform_int(ds.vocab.size() - 1)));
      }
    }
    rec.labels.push_back(cls);
    ds.records.push_back(std::move(rec));
  }
  // Shuffle so record order carries no class pattern: round-robin order
  // would otherwise alias with any strided train/test split.
  for (size_t i = ds.records.size() - 1; i > 0; --i)
    std::swap(ds.records[i],
              ds.records[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i) + 1))]);
  return ds;
}

void write_dataset(const SynthDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw IoError("cannot write manifest under " + dir);
  char name[32];
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const PairRecord& rec = ds.records[i];
    std::snprintf(name, sizeof(name), "img_%06zu.png", i);
    write_png((fs::path(dir) / name).string(), rec.image);
    std::string caption;
    for (size_t t = 0; t < rec.tokens.size(); ++t) {
      if (t) caption += ' ';
      caption += ds.vocab.word(rec.tokens[t]);
    }
    json j{{"image", name}, {"caption", caption}};
    if (!rec.labels.empty()) j["labels"] = rec.labels;
    manifest << j.dump() << '\n';
  }
}

}  // namespace tvssl
