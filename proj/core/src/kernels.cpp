#include "blr/kernels.hpp"

#include <algorithm>
#include <numeric>

#include "blr/error.hpp"
#include "detail.hpp"
#include "kernels_simd.hpp"

namespace blr {

namespace {

struct KernelTable {
    float (*dense_dot)(const float*, const float*, std::size_t);
    void (*score_dense)(const simd::DenseBatch&);
    int (*packed_dot)(const std::uint32_t*, const std::uint32_t*, std::size_t);
    void (*score_packed)(const simd::PackedBatch&);
    std::string_view isa;
};

KernelTable select_kernels() {
#if defined(BLR_HAVE_AVX2_KERNELS)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") && __builtin_cpu_supports("popcnt")) {
        return {simd::dense_dot_avx2, simd::score_dense_avx2, simd::packed_dot_avx2, simd::score_packed_avx2,
                "avx2"};
    }
#endif
    return {simd::dense_dot_portable, simd::score_dense_portable, simd::packed_dot_portable,
            simd::score_packed_portable, "portable"};
}

const KernelTable& kernels() {
    static const KernelTable table = select_kernels();
    return table;
}

void check_range(std::size_t first, std::size_t count, std::size_t num_items) {
    if (first > num_items || count > num_items - first) {
        throw InvalidArgument("score buffer covers items beyond the catalog");
    }
}

}  // namespace

PackedVector pack_bits(std::span<const float> signs) {
    if (signs.empty() || signs.size() % kBitsPerWord != 0) {
        throw InvalidArgument("sign vector length must be a positive multiple of 32");
    }
    PackedVector packed;
    packed.words.assign(signs.size() / kBitsPerWord, 0u);
    for (std::size_t e = 0; e < signs.size(); ++e) {
        if (signs[e] == 1.0f) {
            packed.words[e / kBitsPerWord] |= 1u << (e % kBitsPerWord);
        } else if (signs[e] != -1.0f) {
            throw InvalidArgument("sign vector element is not +1 or -1");
        }
    }
    return packed;
}

int packed_dot(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (a.size() != b.size()) throw InvalidArgument("packed vectors differ in length");
    if (a.empty()) throw InvalidArgument("packed vectors are empty");
    return kernels().packed_dot(a.data(), b.data(), a.size());
}

float dense_dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw InvalidArgument("vectors differ in length");
    if (a.size() % kBitsPerWord != 0) throw InvalidArgument("vector length must be a multiple of 32");
    return kernels().dense_dot(a.data(), b.data(), a.size());
}

float predict_packed(const PackedModel& model, Index u, Index i) {
    const auto user = model.user_bits(u);
    const auto item = model.item_bits(i);
    const int dot = kernels().packed_dot(user.data(), item.data(), user.size());
    return combine_binary(model.user_scales()[u], model.item_scales()[i], static_cast<float>(dot),
                          model.user_bias()[u], model.item_bias()[i]);
}

void score_all(const DenseModel& model, Index u, std::span<float> out, Index first_item) {
    check_range(first_item, out.size(), model.num_items());
    const auto user = model.user_factors(u);
    if (out.empty()) return;

    if (model.mode() == Representation::binary) {
        const auto user_signs = sign_vec(user);
        const float user_scale = scale_factor(user);
        const float user_bias = model.user_bias()[u];
        for (std::size_t k = 0; k < out.size(); ++k) {
            const auto i = static_cast<Index>(first_item + k);
            const auto item = model.item_factors(i);
            out[k] = combine_binary(user_scale, scale_factor(item), detail::sign_dot(user_signs, item), user_bias,
                                    model.item_bias()[i]);
        }
        return;
    }

    kernels().score_dense(simd::DenseBatch{
        .user = user.data(),
        .items = model.all_item_factors().data() + static_cast<std::size_t>(first_item) * model.dim(),
        .dim = model.dim(),
        .count = out.size(),
        .user_bias = model.user_bias()[u],
        .item_bias = model.item_bias().data() + first_item,
        .out = out.data(),
    });
}

void score_all(const PackedModel& model, Index u, std::span<float> out, Index first_item) {
    check_range(first_item, out.size(), model.num_items());
    const auto user = model.user_bits(u);
    if (out.empty()) return;
    kernels().score_packed(simd::PackedBatch{
        .user = user.data(),
        .items = model.all_item_bits().data() + static_cast<std::size_t>(first_item) * model.words_per_vec(),
        .words = model.words_per_vec(),
        .count = out.size(),
        .user_scale = model.user_scales()[u],
        .item_scales = model.item_scales().data() + first_item,
        .user_bias = model.user_bias()[u],
        .item_bias = model.item_bias().data() + first_item,
        .out = out.data(),
    });
}

std::vector<Index> top_k(std::span<const float> scores, std::size_t k) {
    std::vector<Index> order(scores.size());
    std::iota(order.begin(), order.end(), Index{0});
    k = std::min(k, order.size());
    auto better = [&](Index a, Index b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
    order.resize(k);
    return order;
}

std::string_view kernel_isa() { return kernels().isa; }

namespace detail {

float dense_dot_unchecked(const float* a, const float* b, std::size_t n) { return kernels().dense_dot(a, b, n); }

}  // namespace detail

}  // namespace blr
