#include "retroclass/kernels.hpp"

#include <cmath>

namespace retroclass {

namespace {
constexpr std::size_t kF32Lanes = 16;
constexpr std::size_t kF64Lanes = 8;
}  // namespace

float dot_f32(std::span<const float> a, std::span<const float> b) noexcept {
  const std::size_t n = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
  float acc[kF32Lanes] = {};
  std::size_t i = 0;
  for (; i + kF32Lanes <= n; i += kF32Lanes) {
    for (std::size_t l = 0; l < kF32Lanes; ++l) acc[l] += pa[i + l] * pb[i + l];
  }
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += pa[i] * pb[i];
  float s = 0.0f;
  for (std::size_t l = 0; l < kF32Lanes; ++l) s += acc[l];
  return s;
}

double dot_f64(std::span<const float> a, std::span<const float> b) noexcept {
  const std::size_t n = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
  double acc[kF64Lanes] = {};
  std::size_t i = 0;
  for (; i + kF64Lanes <= n; i += kF64Lanes) {
    for (std::size_t l = 0; l < kF64Lanes; ++l) {
      acc[l] += static_cast<double>(pa[i + l]) * static_cast<double>(pb[i + l]);
    }
  }
  for (std::size_t l = 0; i < n; ++i, ++l) {
    acc[l] += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  }
  double s = 0.0;
  for (std::size_t l = 0; l < kF64Lanes; ++l) s += acc[l];
  return s;
}

double l2_norm(std::span<const float> v) noexcept {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

double dot_f32_error_bound(std::size_t dim, double a_norm,
                           double b_norm) noexcept {
  // Each lane sums ceil(dim/16) products, then 16 lane totals are added in
  // sequence: at most ceil(dim/16) + 16 rounding steps on any path. Twice the
  // unit roundoff covers the gamma_n denominator and FMA contraction.
  const double steps =
      static_cast<double>((dim + kF32Lanes - 1) / kF32Lanes + kF32Lanes);
  const double u2 = std::ldexp(1.0, -23);
  return steps * u2 * a_norm * b_norm;
}

}  // namespace retroclass
