#ifndef TVSSL_OPS_HPP_
#define TVSSL_OPS_HPP_

#include <vector>

#include "tvssl/tensor.hpp"

// Differentiable operations. Each op runs the forward kernel, verifies the
// output is finite, and (when a tape is active and some input requires grad)
// records a backward closure. Gradients accumulate into input .grad buffers.

namespace tvssl::ops {

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int64_t stride, int64_t padding);

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// input [B,C] or [B,C,H,W]; gamma/beta/running_* are [C]. Train mode
// normalizes with batch statistics and updates running stats in place
// (EMA, no gradient); eval mode uses running stats.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, double eps,
                  double momentum, bool training);

Tensor relu(const Tensor& input);

Tensor avg_pool(const Tensor& input, int64_t kh, int64_t kw, int64_t stride);

// [B,C,H,W] -> [B,C], mean over the spatial grid
Tensor spatial_mean(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

// scores[m,n] = <a_m, b_n>; a is [Ba,D], b is [Bb,D]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose2d(const Tensor& a);

// -log( exp(pos) / (exp(pos) + sum exp(negs)) ), log-sum-exp stabilized.
// Plain function on scalars (used by oracles and spot checks).
double info_nce(double pos_score, const std::vector<double>& neg_scores);

// Multiscale infoNCE over scale pairs 1-to-5, 1-to-7 and 5-to-5, both view
// orders, in-batch negatives at matching spatial locations; mean over terms.
// f1 is [B,D]; f5 [B,D,5,5]; f7 [B,D,7,7].
Tensor intra_infomax(const Tensor& f1a, const Tensor& f5a, const Tensor& f7a,
                     const Tensor& f1b, const Tensor& f5b, const Tensor& f7b);

// sum_m sum_{k!=m} max(0, alpha - S[m,m] + S[m,k]); subgradient 0 at the
// boundary. Row direction only; transpose the matrix for the other one.
Tensor pairwise_ranking_directional(const Tensor& score_matrix, double alpha);

// sum_m [ logsumexp(S[m,:]) - S[m,m] ]
Tensor nce_rows(const Tensor& score_matrix);

// mean over batch of -log softmax(logits)[label]
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// mean over all entries of the per-class binary cross-entropy on logits
Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets01);

}  // namespace tvssl::ops

#endif  // TVSSL_OPS_HPP_
