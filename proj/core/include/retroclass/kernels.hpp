#pragma once

#include <cstddef>
#include <span>

namespace retroclass {

// Float dot product with 16 independent accumulators. Result depends only on
// the inputs, never on alignment or call site.
float dot_f32(std::span<const float> a, std::span<const float> b) noexcept;

// Dot product accumulated in double; used for final hit scores.
double dot_f64(std::span<const float> a, std::span<const float> b) noexcept;

double l2_norm(std::span<const float> v) noexcept;

// Upper bound on |dot_f32(a, b) - exact| for ||a|| <= a_norm, ||b|| <= b_norm.
double dot_f32_error_bound(std::size_t dim, double a_norm,
                           double b_norm) noexcept;

}  // namespace retroclass
