#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "blr/model.hpp"

namespace blr {

/// Sign vector packed into 32-bit words, layout as in PackedModel.
struct PackedVector {
    std::vector<std::uint32_t> words;

    std::size_t size() const noexcept { return words.size() * kBitsPerWord; }
    bool operator==(const PackedVector&) const = default;
};

/// Packs a {-1, +1} vector. Throws InvalidArgument if the length is not a
/// positive multiple of 32 or an element is not exactly +-1.
PackedVector pack_bits(std::span<const float> signs);

/// Integer dot product of two packed sign vectors: n - 2 * popcount(a ^ b).
int packed_dot(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
inline int packed_dot(const PackedVector& a, const PackedVector& b) { return packed_dot(a.words, b.words); }

/// Dense float dot product for lengths that are multiples of 32.
///
/// Reduction order is fixed: four 8-lane fused multiply-add accumulators take
/// consecutive 8-element blocks in rotation, are combined as
/// (acc0 + acc1) + (acc2 + acc3), and the 8 lanes are summed pairwise
/// (0+4, 1+5, 2+6, 3+7, then 0+2, 1+3, then 0+1). The SIMD and portable paths
/// produce identical bits.
float dense_dot(std::span<const float> a, std::span<const float> b);

/// beta_u * alpha_i * dot + b_u + b_i with a fixed evaluation order shared by
/// every binary scoring path.
inline float combine_binary(float user_scale, float item_scale, float sign_dot, float user_bias,
                            float item_bias) {
    return (user_scale * item_scale) * sign_dot + user_bias + item_bias;
}

float predict_packed(const PackedModel& model, Index u, Index i);

/// Scores items [first_item, first_item + out.size()) for user u. Results are
/// bit-identical to the corresponding per-item predict calls. For a
/// DenseModel the forward rule follows the model's mode flag.
void score_all(const DenseModel& model, Index u, std::span<float> out, Index first_item = 0);
void score_all(const PackedModel& model, Index u, std::span<float> out, Index first_item = 0);

/// Indices of the k highest scores, best first; ties broken by lower index.
std::vector<Index> top_k(std::span<const float> scores, std::size_t k);

/// Instruction set used by the dispatched kernels ("avx2" or "portable").
std::string_view kernel_isa();

}  // namespace blr
