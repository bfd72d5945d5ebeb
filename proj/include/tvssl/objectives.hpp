#ifndef TVSSL_OBJECTIVES_HPP_
#define TVSSL_OBJECTIVES_HPP_

#include <string>

#include "tvssl/encoders.hpp"
#include "tvssl/nn.hpp"

namespace tvssl {

enum class InterKind { kRanking, kNce };

InterKind inter_kind_from_string(const std::string& s);
std::string to_string(InterKind k);

struct LossConfig {
  double alpha = 0.5;          // ranking margin
  double lambda_inter = 1.0;   // weight of the inter-modality term
  InterKind inter_kind = InterKind::kRanking;
  bool use_local = true;       // include spatially averaged f5/f7 features
  bool use_v2t = true;         // also score in the text feature space
  bool use_bn = true;          // batch-norm stages in the projection heads

  void validate() const;
};

// The four inter-modality projection maps. With use_bn=false every
// batch-norm stage is the identity.
class ProjectionHeads {
 public:
  ProjectionHeads() = default;
  ProjectionHeads(int64_t d_t, int64_t nrkhs, bool use_bn, uint64_t seed);

  Tensor f_t_img(const Tensor& t, bool training);  // linear d_t->nrkhs, then BN
  Tensor f_v_img(const Tensor& v, bool training);  // BN over nrkhs
  Tensor f_t_txt(const Tensor& t, bool training);  // BN over d_t
  Tensor f_v_txt(const Tensor& v, bool training);  // linear nrkhs->d_t, then BN

  bool use_bn() const { return use_bn_; }
  int64_t d_t() const { return d_t_; }
  int64_t nrkhs() const { return nrkhs_; }

  std::vector<Tensor> parameters();
  nn::NamedTensors named_parameters();
  nn::NamedTensors named_buffers();

  nn::Linear& w_t_img() { return w_t_img_; }
  nn::Linear& w_v_txt() { return w_v_txt_; }

 private:
  int64_t d_t_ = 0, nrkhs_ = 0;
  bool use_bn_ = true;
  nn::Linear w_t_img_;
  nn::BatchNorm bn_t_img_, bn_v_img_, bn_t_txt_, bn_v_txt_;
  nn::Linear w_v_txt_;
};

// Multiscale infoNCE over augmented views (scale pairs 1-to-5, 1-to-7,
// 5-to-5, both view orders, in-batch negatives), averaged over terms.
Tensor intra_infomax_loss(const MultiscaleFeatures& feats1,
                          const MultiscaleFeatures& feats2);

// S[m,n] = <f_t^img(t_m), f_v^img(v_n)>; diagonal = positive pairs
Tensor match_score_image_space(ProjectionHeads& heads, const Tensor& t,
                               const Tensor& v, bool training);

// S[m,n] = <f_t^txt(t_m), f_v^txt(v_n)>
Tensor match_score_text_space(ProjectionHeads& heads, const Tensor& t,
                              const Tensor& v, bool training);

// Ranking (or NCE) over every active (visual feature, space) score matrix in
// both directions, normalized by the number of hinge/NCE terms.
Tensor inter_modality_loss(ProjectionHeads& heads, const Tensor& t,
                           const MultiscaleFeatures& visual_feats,
                           const LossConfig& cfg, bool training);

// intra + lambda_inter * inter
Tensor total_loss(const Tensor& intra, const Tensor& inter, const LossConfig& cfg);
double total_loss(double intra, double inter, const LossConfig& cfg);

}  // namespace tvssl

#endif  // TVSSL_OBJECTIVES_HPP_
