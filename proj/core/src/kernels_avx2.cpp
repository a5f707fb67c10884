// Built with -mavx2 -mfma -mpopcnt. Keep this file free of standard library
// templates so no AVX2-compiled inline definitions leak into other objects.

#include <immintrin.h>

#include "kernels_simd.hpp"

namespace blr::simd {

namespace {

inline float horizontal_sum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);                  // 0+4, 1+5, 2+6, 3+7
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));         // (0+4)+(2+6), (1+5)+(3+7)
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));  // lane0 + lane1
    return _mm_cvtss_f32(s);
}

inline float dot32(const float* a, const float* b, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    __m256 acc2 = _mm256_setzero_ps();
    __m256 acc3 = _mm256_setzero_ps();
    for (std::size_t k = 0; k < n; k += 32) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k + 8), _mm256_loadu_ps(b + k + 8), acc1);
        acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k + 16), _mm256_loadu_ps(b + k + 16), acc2);
        acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k + 24), _mm256_loadu_ps(b + k + 24), acc3);
    }
    return horizontal_sum(_mm256_add_ps(_mm256_add_ps(acc0, acc1), _mm256_add_ps(acc2, acc3)));
}

inline unsigned long long load_u64(const std::uint32_t* p) {
    unsigned long long x;
    __builtin_memcpy(&x, p, sizeof x);  // little-endian: word p[0] is the low half
    return x;
}

inline int xor_popcount(const std::uint32_t* a, const std::uint32_t* b, std::size_t words) {
    long long bits = 0;
    std::size_t w = 0;
    // 256 sign bits per step: one vector XOR, four 64-bit popcounts.
    for (; w + 8 <= words; w += 8) {
        const __m256i x = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + w)),
                                           _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + w)));
        bits += _mm_popcnt_u64(static_cast<unsigned long long>(_mm256_extract_epi64(x, 0)));
        bits += _mm_popcnt_u64(static_cast<unsigned long long>(_mm256_extract_epi64(x, 1)));
        bits += _mm_popcnt_u64(static_cast<unsigned long long>(_mm256_extract_epi64(x, 2)));
        bits += _mm_popcnt_u64(static_cast<unsigned long long>(_mm256_extract_epi64(x, 3)));
    }
    for (; w + 2 <= words; w += 2) bits += _mm_popcnt_u64(load_u64(a + w) ^ load_u64(b + w));
    if (w < words) bits += _mm_popcnt_u32(a[w] ^ b[w]);
    return static_cast<int>(words * 32) - 2 * static_cast<int>(bits);
}

}  // namespace

float dense_dot_avx2(const float* a, const float* b, std::size_t n) { return dot32(a, b, n); }

void score_dense_avx2(const DenseBatch& batch) {
    const float* item = batch.items;
    for (std::size_t i = 0; i < batch.count; ++i, item += batch.dim) {
        batch.out[i] = dot32(batch.user, item, batch.dim) + batch.user_bias + batch.item_bias[i];
    }
}

int packed_dot_avx2(const std::uint32_t* a, const std::uint32_t* b, std::size_t words) {
    return xor_popcount(a, b, words);
}

namespace {

template <std::size_t Words>
void score_packed_fixed(const PackedBatch& batch) {
    const std::uint32_t* item = batch.items;
    for (std::size_t i = 0; i < batch.count; ++i, item += Words) {
        const int dot = xor_popcount(batch.user, item, Words);
        batch.out[i] = (batch.user_scale * batch.item_scales[i]) * static_cast<float>(dot) + batch.user_bias +
                       batch.item_bias[i];
    }
}

}  // namespace

void score_packed_avx2(const PackedBatch& batch) {
    if (batch.words == 1) {
        const std::uint32_t u = batch.user[0];
        for (std::size_t i = 0; i < batch.count; ++i) {
            const int dot = 32 - 2 * _mm_popcnt_u32(u ^ batch.items[i]);
            batch.out[i] = (batch.user_scale * batch.item_scales[i]) * static_cast<float>(dot) + batch.user_bias +
                           batch.item_bias[i];
        }
        return;
    }
    switch (batch.words) {
        case 2: return score_packed_fixed<2>(batch);
        case 4: return score_packed_fixed<4>(batch);
        case 8: return score_packed_fixed<8>(batch);
        default: break;
    }
    const std::uint32_t* item = batch.items;
    for (std::size_t i = 0; i < batch.count; ++i, item += batch.words) {
        const int dot = xor_popcount(batch.user, item, batch.words);
        batch.out[i] = (batch.user_scale * batch.item_scales[i]) * static_cast<float>(dot) + batch.user_bias +
                       batch.item_bias[i];
    }
}

}  // namespace blr::simd
