#pragma once

// Raw-pointer kernel entry points. The avx2 variants live in a translation
// unit built with -mavx2 -mfma -mpopcnt and must only be called after a
// runtime CPU check; the portable variants reproduce their results exactly.

#include <cstddef>
#include <cstdint>

namespace blr::simd {

struct DenseBatch {
    const float* user;
    const float* items;
    std::size_t dim;
    std::size_t count;
    float user_bias;
    const float* item_bias;
    float* out;
};

struct PackedBatch {
    const std::uint32_t* user;
    const std::uint32_t* items;
    std::size_t words;
    std::size_t count;
    float user_scale;
    const float* item_scales;
    float user_bias;
    const float* item_bias;
    float* out;
};

float dense_dot_avx2(const float* a, const float* b, std::size_t n);
void score_dense_avx2(const DenseBatch& batch);
int packed_dot_avx2(const std::uint32_t* a, const std::uint32_t* b, std::size_t words);
void score_packed_avx2(const PackedBatch& batch);

float dense_dot_portable(const float* a, const float* b, std::size_t n);
void score_dense_portable(const DenseBatch& batch);
int packed_dot_portable(const std::uint32_t* a, const std::uint32_t* b, std::size_t words);
void score_packed_portable(const PackedBatch& batch);

}  // namespace blr::simd
