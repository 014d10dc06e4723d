#include "lunarforge/simd/kernels.hpp"

#if defined(LUNARFORGE_HAVE_AVX2)

#include <immintrin.h>


namespace lunarforge::simd::avx2 {

NearestResult min_sq_dist(double qx, double qy, double qz, const double* xs, const double* ys,
                          const double* zs, std::size_t n) {
  NearestResult best;
  std::size_t i = 0;
  if (n >= 4) {
    const __m256d vqx = _mm256_set1_pd(qx);
    const __m256d vqy = _mm256_set1_pd(qy);
    const __m256d vqz = _mm256_set1_pd(qz);
    __m256d vbest = _mm256_set1_pd(best.dist_sq);
    __m256d vidx = _mm256_set1_pd(-1.0);
    __m256d lane = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d four = _mm256_set1_pd(4.0);
    for (; i + 4 <= n; i += 4) {
      const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx);
      const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy);
      const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vqz);
      const __m256d d2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                       _mm256_mul_pd(dz, dz));
      const __m256d better = _mm256_cmp_pd(d2, vbest, _CMP_LT_OQ);
      vbest = _mm256_blendv_pd(vbest, d2, better);
      vidx = _mm256_blendv_pd(vidx, lane, better);
      lane = _mm256_add_pd(lane, four);
    }
    alignas(32) double b[4];
    alignas(32) double idx[4];
    _mm256_store_pd(b, vbest);
    _mm256_store_pd(idx, vidx);
    for (int l = 0; l < 4; ++l) {
      if (idx[l] < 0.0) continue;
      const auto li = static_cast<std::size_t>(idx[l]);
      if (b[l] < best.dist_sq || (b[l] == best.dist_sq && li < best.index)) {
        best.dist_sq = b[l];
        best.index = li;
      }
    }
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    const double d2 = (dx * dx + dy * dy) + dz * dz;
    if (d2 < best.dist_sq) {
      best.dist_sq = d2;
      best.index = i;
    }
  }
  return best;
}

void convolve_rows(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out) {
  const std::size_t taps = weights.size();
  const std::size_t out_w = width - taps + 1;
  for (std::size_t r = 0; r < height; ++r) {
    const double* src = in + r * width;
    double* dst = out + r * out_w;
    std::size_t c = 0;
    for (; c + 4 <= out_w; c += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < taps; ++k) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(weights[k]),
                                               _mm256_loadu_pd(src + c + k)));
      }
      _mm256_storeu_pd(dst + c, acc);
    }
    for (; c < out_w; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * src[c + k];
      dst[c] = acc;
    }
  }
}

void convolve_cols(const double* in, std::size_t width, std::size_t height,
                   std::span<const double> weights, double* out) {
  const std::size_t taps = weights.size();
  const std::size_t out_h = height - taps + 1;
  for (std::size_t r = 0; r < out_h; ++r) {
    double* dst = out + r * width;
    std::size_t c = 0;
    for (; c + 4 <= width; c += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < taps; ++k) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(weights[k]),
                                               _mm256_loadu_pd(in + (r + k) * width + c)));
      }
      _mm256_storeu_pd(dst + c, acc);
    }
    for (; c < width; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * in[(r + k) * width + c];
      dst[c] = acc;
    }
  }
}

void ssim_combine(const double* mu_x, const double* mu_y, const double* e_xx, const double* e_yy,
                  const double* e_xy, double c1, double c2, double* out, std::size_t n) {
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mx = _mm256_loadu_pd(mu_x + i);
    const __m256d my = _mm256_loadu_pd(mu_y + i);
    const __m256d mxx = _mm256_mul_pd(mx, mx);
    const __m256d myy = _mm256_mul_pd(my, my);
    const __m256d mxy = _mm256_mul_pd(mx, my);
    const __m256d sxx = _mm256_sub_pd(_mm256_loadu_pd(e_xx + i), mxx);
    const __m256d syy = _mm256_sub_pd(_mm256_loadu_pd(e_yy + i), myy);
    const __m256d sxy = _mm256_sub_pd(_mm256_loadu_pd(e_xy + i), mxy);
    const __m256d num = _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(two, mxy), vc1),
                                      _mm256_add_pd(_mm256_mul_pd(two, sxy), vc2));
    const __m256d den = _mm256_mul_pd(_mm256_add_pd(_mm256_add_pd(mxx, myy), vc1),
                                      _mm256_add_pd(_mm256_add_pd(sxx, syy), vc2));
    _mm256_storeu_pd(out + i, _mm256_div_pd(num, den));
  }
  if (i < n) scalar::ssim_combine(mu_x + i, mu_y + i, e_xx + i, e_yy + i, e_xy + i, c1, c2, out + i, n - i);
}

namespace {

inline void gradients(const double* north, const double* center, const double* south, std::size_t c,
                      __m256d inv, __m256d& gx, __m256d& gy) {
  gx = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(center + c + 1), _mm256_loadu_pd(center + c - 1)), inv);
  gy = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(north + c), _mm256_loadu_pd(south + c)), inv);
}

}  // namespace

void gradient_norm_row(const double* north, const double* center, const double* south,
                       std::size_t width, double inv_2h, double* out) {
  if (width < 3) return;
  const __m256d inv = _mm256_set1_pd(inv_2h);
  std::size_t c = 1;
  for (; c + 4 <= width - 1; c += 4) {
    __m256d gx, gy;
    gradients(north, center, south, c, inv, gx, gy);
    const __m256d m = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(gx, gx), _mm256_mul_pd(gy, gy)));
    _mm256_storeu_pd(out + c, m);
  }
  // Scalar tail: reuse the reference on a 3-column window ending at each remaining cell.
  for (; c + 1 < width; ++c) scalar::gradient_norm_row(north + c - 1, center + c - 1, south + c - 1, 3, inv_2h, out + c - 1);
}

void hillshade_row(const double* north, const double* center, const double* south,
                   std::size_t width, double inv_2h, double sx, double sy, double sz, double* out) {
  if (width < 3) return;
  const __m256d inv = _mm256_set1_pd(inv_2h);
  const __m256d vsx = _mm256_set1_pd(sx);
  const __m256d vsy = _mm256_set1_pd(sy);
  const __m256d vsz = _mm256_set1_pd(sz);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t c = 1;
  for (; c + 4 <= width - 1; c += 4) {
    __m256d gx, gy;
    gradients(north, center, south, c, inv, gx, gy);
    const __m256d num = _mm256_sub_pd(_mm256_sub_pd(vsz, _mm256_mul_pd(gx, vsx)), _mm256_mul_pd(gy, vsy));
    const __m256d den = _mm256_sqrt_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(gx, gx), _mm256_mul_pd(gy, gy)), one));
    const __m256d v = _mm256_div_pd(num, den);
    // max_pd returns its second operand when either is NaN, so NaN survives.
    _mm256_storeu_pd(out + c, _mm256_max_pd(zero, v));
  }
  for (; c + 1 < width; ++c)
    scalar::hillshade_row(north + c - 1, center + c - 1, south + c - 1, 3, inv_2h, sx, sy, sz, out + c - 1);
}

}  // namespace lunarforge::simd::avx2

#endif
