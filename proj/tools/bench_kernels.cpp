// Compares the optimized (im2col + GEMM, OpenMP) kernels against the naive
// serial reference on training-sized workloads.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "tvssl/common.hpp"
#include "tvssl/kernels.hpp"
#include "tvssl/kernels_serial.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> random_vec(size_t n, tvssl::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double checksum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

}  // namespace

int main() {
  tvssl::Rng rng(42);
  std::printf("threads: %d\n\n", omp_get_max_threads());

  {
    const int64_t B = 16, C = 16, H = 32, W = 32, K = 16, k = 3;
    const int64_t Ho = H, Wo = W;  // pad 1, stride 1
    auto in = random_vec(static_cast<size_t>(B * C * H * W), rng);
    auto w = random_vec(static_cast<size_t>(K * C * k * k), rng);
    auto bias = random_vec(static_cast<size_t>(K), rng);
    std::vector<double> out_fast(static_cast<size_t>(B * K * Ho * Wo));
    std::vector<double> out_ref(out_fast.size());

    const double t_fast = time_best_of(3, [&] {
      tvssl::kernels::conv2d_forward(in.data(), B, C, H, W, w.data(), K, k, k,
                                     bias.data(), 1, 1, out_fast.data());
    });
    const double t_ref = time_best_of(3, [&] {
      tvssl::kernels::serial::conv2d_forward(in.data(), B, C, H, W, w.data(), K, k, k,
                                             bias.data(), 1, 1, out_ref.data());
    });
    double max_diff = 0.0;
    for (size_t i = 0; i < out_fast.size(); ++i)
      max_diff = std::max(max_diff, std::fabs(out_fast[i] - out_ref[i]));
    const double gflops = 2.0 * B * K * Ho * Wo * C * k * k / 1e9;
    std::printf("conv2d  %lldx%lldx%lldx%lld k%lld:\n", (long long)B, (long long)C,
                (long long)H, (long long)W, (long long)k);
    std::printf("  optimized %.4fs (%.2f GFLOP/s)   serial %.4fs (%.2f GFLOP/s)\n",
                t_fast, gflops / t_fast, t_ref, gflops / t_ref);
    std::printf("  speedup %.2fx   max |diff| %.3e   checksum %.6f\n\n", t_ref / t_fast,
                max_diff, checksum(out_fast));
  }

  {
    const int64_t m = 512, n = 512, k = 512;
    auto A = random_vec(static_cast<size_t>(m * k), rng);
    auto B = random_vec(static_cast<size_t>(k * n), rng);
    std::vector<double> C_fast(static_cast<size_t>(m * n)), C_ref(C_fast.size());

    const double t_fast = time_best_of(3, [&] {
      tvssl::kernels::gemm_nn(m, n, k, A.data(), B.data(), C_fast.data(), false);
    });
    const double t_ref = time_best_of(3, [&] {
      tvssl::kernels::serial::matmul_nn(m, n, k, A.data(), B.data(), C_ref.data(), false);
    });
    double max_diff = 0.0;
    for (size_t i = 0; i < C_fast.size(); ++i)
      max_diff = std::max(max_diff, std::fabs(C_fast[i] - C_ref[i]));
    const double gflops = 2.0 * m * n * k / 1e9;
    std::printf("gemm_nn %lldx%lldx%lld:\n", (long long)m, (long long)n, (long long)k);
    std::printf("  optimized %.4fs (%.2f GFLOP/s)   serial %.4fs (%.2f GFLOP/s)\n",
                t_fast, gflops / t_fast, t_ref, gflops / t_ref);
    std::printf("  speedup %.2fx   max |diff| %.3e   checksum %.6f\n", t_ref / t_fast,
                max_diff, checksum(C_fast));
  }
  return 0;
}
