#include "tvssl/objectives.hpp"

#include <cmath>

namespace tvssl {

InterKind inter_kind_from_string(const std::string& s) {
  if (s == "ranking") return InterKind::kRanking;
  if (s == "nce") return InterKind::kNce;
  throw ConfigError("unknown inter_kind: " + s);
}

std::string to_string(InterKind k) {
  return k == InterKind::kRanking ? "ranking" : "nce";
}

void LossConfig::validate() const {
  TVSSL_CHECK_CFG(lambda_inter >= 0, "lambda_inter must be >= 0");
  if (inter_kind == InterKind::kRanking)
    TVSSL_CHECK_CFG(alpha > 0, "ranking margin alpha must be > 0");
}

ProjectionHeads::ProjectionHeads(int64_t d_t, int64_t nrkhs, bool use_bn, uint64_t seed)
    : d_t_(d_t), nrkhs_(nrkhs), use_bn_(use_bn) {
  Rng rng(mix64(seed ^ 0x48454144u));
  w_t_img_ = nn::Linear(d_t, nrkhs, rng);
  w_v_txt_ = nn::Linear(nrkhs, d_t, rng);
  bn_t_img_ = nn::BatchNorm(nrkhs);
  bn_v_img_ = nn::BatchNorm(nrkhs);
  bn_t_txt_ = nn::BatchNorm(d_t);
  bn_v_txt_ = nn::BatchNorm(d_t);
}

Tensor ProjectionHeads::f_t_img(const Tensor& t, bool training) {
  Tensor h = w_t_img_.forward(t);
  return use_bn_ ? bn_t_img_.forward(h, training) : h;
}

Tensor ProjectionHeads::f_v_img(const Tensor& v, bool training) {
  return use_bn_ ? bn_v_img_.forward(v, training) : v;
}

Tensor ProjectionHeads::f_t_txt(const Tensor& t, bool training) {
  return use_bn_ ? bn_t_txt_.forward(t, training) : t;
}

Tensor ProjectionHeads::f_v_txt(const Tensor& v, bool training) {
  Tensor h = w_v_txt_.forward(v);
  return use_bn_ ? bn_v_txt_.forward(h, training) : h;
}

std::vector<Tensor> ProjectionHeads::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

nn::NamedTensors ProjectionHeads::named_parameters() {
  nn::NamedTensors p, b;
  w_t_img_.collect("heads.w_t_img", p, b);
  w_v_txt_.collect("heads.w_v_txt", p, b);
  if (use_bn_) {
    bn_t_img_.collect("heads.bn_t_img", p, b);
    bn_v_img_.collect("heads.bn_v_img", p, b);
    bn_t_txt_.collect("heads.bn_t_txt", p, b);
    bn_v_txt_.collect("heads.bn_v_txt", p, b);
  }
  return p;
}

nn::NamedTensors ProjectionHeads::named_buffers() {
  nn::NamedTensors p, b;
  w_t_img_.collect("heads.w_t_img", p, b);
  w_v_txt_.collect("heads.w_v_txt", p, b);
  if (use_bn_) {
    bn_t_img_.collect("heads.bn_t_img", p, b);
    bn_v_img_.collect("heads.bn_v_img", p, b);
    bn_t_txt_.collect("heads.bn_t_txt", p, b);
    bn_v_txt_.collect("heads.bn_v_txt", p, b);
  }
  return b;
}

Tensor intra_infomax_loss(const MultiscaleFeatures& feats1,
                          const MultiscaleFeatures& feats2) {
  return ops::intra_infomax(feats1.f1, feats1.f5, feats1.f7,
                            feats2.f1, feats2.f5, feats2.f7);
}

Tensor match_score_image_space(ProjectionHeads& heads, const Tensor& t,
                               const Tensor& v, bool training) {
  TVSSL_CHECK(t.ndim() == 2 && v.ndim() == 2 && t.dim(0) == v.dim(0),
              "match_score: batch-aligned [B,d] inputs required");
  return ops::matmul_nt(heads.f_t_img(t, training), heads.f_v_img(v, training));
}

Tensor match_score_text_space(ProjectionHeads& heads, const Tensor& t,
                              const Tensor& v, bool training) {
  TVSSL_CHECK(t.ndim() == 2 && v.ndim() == 2 && t.dim(0) == v.dim(0),
              "match_score: batch-aligned [B,d] inputs required");
  return ops::matmul_nt(heads.f_t_txt(t, training), heads.f_v_txt(v, training));
}

Tensor inter_modality_loss(ProjectionHeads& heads, const Tensor& t,
                           const MultiscaleFeatures& visual_feats,
                           const LossConfig& cfg, bool training) {
  cfg.validate();
  const int64_t B = t.dim(0);
  TVSSL_CHECK(B >= 2, "inter_modality_loss: batch must be >= 2 for in-batch negatives");

  std::vector<Tensor> visuals;
  visuals.push_back(visual_feats.f1);
  if (cfg.use_local) {
    visuals.push_back(ops::spatial_mean(visual_feats.f5));
    visuals.push_back(ops::spatial_mean(visual_feats.f7));
  }

  Tensor acc;
  int64_t n_matrices = 0;
  auto add_matrix = [&](Tensor S) {
    Tensor term;
    if (cfg.inter_kind == InterKind::kRanking) {
      term = ops::add(ops::pairwise_ranking_directional(S, cfg.alpha),
                      ops::pairwise_ranking_directional(ops::transpose2d(S), cfg.alpha));
    } else {
      term = ops::add(ops::nce_rows(S), ops::nce_rows(ops::transpose2d(S)));
    }
    acc = acc.defined() ? ops::add(acc, term) : term;
    ++n_matrices;
  };

  for (const Tensor& v : visuals) {
    add_matrix(match_score_image_space(heads, t, v, training));
    if (cfg.use_v2t) add_matrix(match_score_text_space(heads, t, v, training));
  }

  const int64_t per_matrix =
      cfg.inter_kind == InterKind::kRanking ? 2 * B * (B - 1) : 2 * B;
  return ops::scale(acc, 1.0 / static_cast<double>(n_matrices * per_matrix));
}

Tensor total_loss(const Tensor& intra, const Tensor& inter, const LossConfig& cfg) {
  TVSSL_CHECK(intra.numel() == 1 && inter.numel() == 1, "total_loss: scalar inputs required");
  return ops::add(intra, ops::scale(inter, cfg.lambda_inter));
}

double total_loss(double intra, double inter, const LossConfig& cfg) {
  if (!std::isfinite(intra) || !std::isfinite(inter))
    throw NumericError("total_loss: non-finite input");
  return intra + cfg.lambda_inter * inter;
}

}  // namespace tvssl
