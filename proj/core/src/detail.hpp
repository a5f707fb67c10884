#pragma once

#include <cstddef>
#include <span>

namespace blr::detail {

inline float sign_of(float w) { return w >= 0.0f ? 1.0f : -1.0f; }

/// Sum of user_signs[e] * sign(values[e]) accumulated in float. Every partial
/// sum is an integer of magnitude <= n, so the result is exact.
inline float sign_dot(std::span<const float> user_signs, std::span<const float> values) {
    float dot = 0.0f;
    for (std::size_t e = 0; e < values.size(); ++e) dot += user_signs[e] * sign_of(values[e]);
    return dot;
}

float dense_dot_unchecked(const float* a, const float* b, std::size_t n);

}  // namespace blr::detail
