#include "lunarforge/simd/kernels.hpp"

#include <cmath>

namespace lunarforge::simd::scalar {

NearestResult min_sq_dist(double qx, double qy, double qz, const double* xs, const double* ys,
                          const double* zs, std::size_t n) {
  NearestResult best;
  for (std::size_t i = 0; i < n; ++i) {
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
    for (std::size_t c = 0; c < out_w; ++c) {
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
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * in[(r + k) * width + c];
      dst[c] = acc;
    }
  }
}

void ssim_combine(const double* mu_x, const double* mu_y, const double* e_xx, const double* e_yy,
                  const double* e_xy, double c1, double c2, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double mxx = mu_x[i] * mu_x[i];
    const double myy = mu_y[i] * mu_y[i];
    const double mxy = mu_x[i] * mu_y[i];
    const double sxx = e_xx[i] - mxx;
    const double syy = e_yy[i] - myy;
    const double sxy = e_xy[i] - mxy;
    const double num = (2.0 * mxy + c1) * (2.0 * sxy + c2);
    const double den = ((mxx + myy) + c1) * ((sxx + syy) + c2);
    out[i] = num / den;
  }
}

void gradient_norm_row(const double* north, const double* center, const double* south,
                       std::size_t width, double inv_2h, double* out) {
  for (std::size_t c = 1; c + 1 < width; ++c) {
    const double gx = (center[c + 1] - center[c - 1]) * inv_2h;
    const double gy = (north[c] - south[c]) * inv_2h;
    out[c] = std::sqrt(gx * gx + gy * gy);
  }
}

void hillshade_row(const double* north, const double* center, const double* south,
                   std::size_t width, double inv_2h, double sx, double sy, double sz, double* out) {
  for (std::size_t c = 1; c + 1 < width; ++c) {
    const double gx = (center[c + 1] - center[c - 1]) * inv_2h;
    const double gy = (north[c] - south[c]) * inv_2h;
    const double num = (sz - gx * sx) - gy * sy;
    const double den = std::sqrt((gx * gx + gy * gy) + 1.0);
    const double v = num / den;
    out[c] = v < 0.0 ? 0.0 : v;
  }
}

}  // namespace lunarforge::simd::scalar
