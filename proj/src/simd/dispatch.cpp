#include "lunarforge/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace lunarforge::simd {

namespace {

struct Table {
  MinSqDistFn min_sq_dist;
  ConvolveFn convolve_rows;
  ConvolveFn convolve_cols;
  SsimCombineFn ssim_combine;
  GradientNormFn gradient_norm_row;
  HillshadeRowFn hillshade_row;
};

constexpr Table kScalar{scalar::min_sq_dist,  scalar::convolve_rows,     scalar::convolve_cols,
                        scalar::ssim_combine, scalar::gradient_norm_row, scalar::hillshade_row};
#if defined(LUNARFORGE_HAVE_AVX2)
constexpr Table kAvx2{avx2::min_sq_dist,  avx2::convolve_rows,     avx2::convolve_cols,
                      avx2::ssim_combine, avx2::gradient_norm_row, avx2::hillshade_row};
#endif

const Table& table_for(Isa isa) {
#if defined(LUNARFORGE_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

Isa detect() noexcept {
  if (const char* env = std::getenv("LUNARFORGE_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const Table& active() { return table_for(current().load(std::memory_order_relaxed)); }

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(LUNARFORGE_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) throw std::invalid_argument("SIMD variant not supported on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

NearestResult min_sq_dist(double qx, double qy, double qz, const double* xs, const double* ys,
                          const double* zs, std::size_t n) {
  return active().min_sq_dist(qx, qy, qz, xs, ys, zs, n);
}
void convolve_rows(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out) {
  active().convolve_rows(in, width, height, weights, out);
}
void convolve_cols(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out) {
  active().convolve_cols(in, width, height, weights, out);
}
void ssim_combine(const double* mu_x, const double* mu_y, const double* e_xx, const double* e_yy,
                  const double* e_xy, double c1, double c2, double* out, std::size_t n) {
  active().ssim_combine(mu_x, mu_y, e_xx, e_yy, e_xy, c1, c2, out, n);
}
void gradient_norm_row(const double* north, const double* center, const double* south,
                       std::size_t width, double inv_2h, double* out) {
  active().gradient_norm_row(north, center, south, width, inv_2h, out);
}
void hillshade_row(const double* north, const double* center, const double* south,
                   std::size_t width, double inv_2h, double sx, double sy, double sz, double* out) {
  active().hillshade_row(north, center, south, width, inv_2h, sx, sy, sz, out);
}

}  // namespace lunarforge::simd
