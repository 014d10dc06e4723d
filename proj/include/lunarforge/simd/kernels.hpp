#pragma once

// Data-parallel inner loops shared by the metric and terrain code. Each kernel
// has a scalar reference in `simd::scalar` and, where the target supports it, an
// AVX2 variant in `simd::avx2`. Variants produce bit-identical results: they use
// the same operation order and no fused multiply-add. The unqualified entry
// points forward to whichever variant `active_isa()` selects at startup.

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>

namespace lunarforge::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;

// Best supported ISA, unless LUNARFORGE_SIMD=scalar|avx2 overrides it.
Isa active_isa() noexcept;
// Forces a variant (tests, benchmarking). Throws if unsupported on this CPU.
void set_active_isa(Isa isa);

struct NearestResult {
  double dist_sq = std::numeric_limits<double>::infinity();
  std::size_t index = static_cast<std::size_t>(-1);
};

// Minimum squared distance from (qx,qy,qz) to the SoA points; ties resolve to
// the lowest index. dist_sq = ((dx*dx + dy*dy) + dz*dz).
using MinSqDistFn = NearestResult (*)(double qx, double qy, double qz, const double* xs,
                                      const double* ys, const double* zs, std::size_t n);

// 'Valid' 1D correlation along rows: out has width - taps + 1 columns and is
// accumulated left to right over taps: out[c] = sum_k w[k] * in[c + k].
using ConvolveFn = void (*)(const double* in, std::size_t width, std::size_t height,
                            std::span<const double> weights, double* out);

// Per-element SSIM from filtered moments; sigma terms are E[xy] - mu_x*mu_y.
using SsimCombineFn = void (*)(const double* mu_x, const double* mu_y, const double* e_xx,
                               const double* e_yy, const double* e_xy, double c1, double c2,
                               double* out, std::size_t n);

// Interior-column gradient kernels over three consecutive rows (north, center,
// south). Column c in [1, width-2] is written; gx = (center[c+1]-center[c-1])*inv_2h,
// gy = (north[c]-south[c])*inv_2h.
//   slope: out[c] = sqrt(gx*gx + gy*gy)            (tangent of the slope angle)
//   shade: out[c] = max(0, n . s), n = (-gx,-gy,1)/|.|   (NaN propagates)
using GradientNormFn = void (*)(const double* north, const double* center, const double* south,
                                std::size_t width, double inv_2h, double* out);
using HillshadeRowFn = void (*)(const double* north, const double* center, const double* south,
                                std::size_t width, double inv_2h, double sx, double sy, double sz,
                                double* out);

namespace scalar {
NearestResult min_sq_dist(double qx, double qy, double qz, const double* xs, const double* ys,
                          const double* zs, std::size_t n);
void convolve_rows(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out);
void convolve_cols(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out);
void ssim_combine(const double* mu_x, const double* mu_y, const double* e_xx, const double* e_yy,
                  const double* e_xy, double c1, double c2, double* out, std::size_t n);
void gradient_norm_row(const double* north, const double* center, const double* south,
                       std::size_t width, double inv_2h, double* out);
void hillshade_row(const double* north, const double* center, const double* south,
                   std::size_t width, double inv_2h, double sx, double sy, double sz, double* out);
}  // namespace scalar

#if defined(LUNARFORGE_HAVE_AVX2)
namespace avx2 {
NearestResult min_sq_dist(double qx, double qy, double qz, const double* xs, const double* ys,
                          const double* zs, std::size_t n);
void convolve_rows(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out);
void convolve_cols(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out);
void ssim_combine(const double* mu_x, const double* mu_y, const double* e_xx, const double* e_yy,
                  const double* e_xy, double c1, double c2, double* out, std::size_t n);
void gradient_norm_row(const double* north, const double* center, const double* south,
                       std::size_t width, double inv_2h, double* out);
void hillshade_row(const double* north, const double* center, const double* south,
                   std::size_t width, double inv_2h, double sx, double sy, double sz, double* out);
}  // namespace avx2
#endif

NearestResult min_sq_dist(double qx, double qy, double qz, const double* xs, const double* ys,
                          const double* zs, std::size_t n);
void convolve_rows(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out);
void convolve_cols(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out);
void ssim_combine(const double* mu_x, const double* mu_y, const double* e_xx, const double* e_yy,
                  const double* e_xy, double c1, double c2, double* out, std::size_t n);
void gradient_norm_row(const double* north, const double* center, const double* south,
                       std::size_t width, double inv_2h, double* out);
void hillshade_row(const double* north, const double* center, const double* south,
                   std::size_t width, double inv_2h, double sx, double sy, double sz, double* out);

}  // namespace lunarforge::simd
