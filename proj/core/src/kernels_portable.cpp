#include <array>
#include <bit>
#include <cmath>

#include "kernels_simd.hpp"

namespace blr::simd {

namespace {

using Lanes = std::array<float, 8>;

// Mirrors the AVX2 reduction: four 8-lane FMA accumulators, pairwise combine,
// then the fixed horizontal order.
float dot32(const float* a, const float* b, std::size_t n) {
    std::array<Lanes, 4> acc{};
    for (std::size_t k = 0; k < n; k += 32) {
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t l = 0; l < 8; ++l) {
                const std::size_t e = k + 8 * r + l;
                acc[r][l] = std::fma(a[e], b[e], acc[r][l]);
            }
        }
    }
    Lanes s{};
    for (std::size_t l = 0; l < 8; ++l) s[l] = (acc[0][l] + acc[1][l]) + (acc[2][l] + acc[3][l]);
    const float t0 = s[0] + s[4];
    const float t1 = s[1] + s[5];
    const float t2 = s[2] + s[6];
    const float t3 = s[3] + s[7];
    return (t0 + t2) + (t1 + t3);
}

int xor_popcount(const std::uint32_t* a, const std::uint32_t* b, std::size_t words) {
    int bits = 0;
    for (std::size_t w = 0; w < words; ++w) bits += std::popcount(a[w] ^ b[w]);
    return static_cast<int>(words * 32) - 2 * bits;
}

}  // namespace

float dense_dot_portable(const float* a, const float* b, std::size_t n) { return dot32(a, b, n); }

void score_dense_portable(const DenseBatch& batch) {
    const float* item = batch.items;
    for (std::size_t i = 0; i < batch.count; ++i, item += batch.dim) {
        batch.out[i] = dot32(batch.user, item, batch.dim) + batch.user_bias + batch.item_bias[i];
    }
}

int packed_dot_portable(const std::uint32_t* a, const std::uint32_t* b, std::size_t words) {
    return xor_popcount(a, b, words);
}

void score_packed_portable(const PackedBatch& batch) {
    const std::uint32_t* item = batch.items;
    for (std::size_t i = 0; i < batch.count; ++i, item += batch.words) {
        const int dot = xor_popcount(batch.user, item, batch.words);
        batch.out[i] = (batch.user_scale * batch.item_scales[i]) * static_cast<float>(dot) + batch.user_bias +
                       batch.item_bias[i];
    }
}

}  // namespace blr::simd
