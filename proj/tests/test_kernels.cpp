#include <doctest.h>

#include <bit>
#include <cstring>
#include <random>

#include "blr/error.hpp"
#include "blr/kernels.hpp"
#include "kernels_simd.hpp"
#include "oracles.hpp"

using namespace blr;

namespace {

std::vector<float> random_signs(std::size_t n, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<float> s(n);
    for (auto& x : s) x = coin(rng) ? 1.0f : -1.0f;
    return s;
}

int elementwise_sign_dot(const std::vector<float>& a, const std::vector<float>& b) {
    int s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<int>(a[k]) * static_cast<int>(b[k]);
    return s;
}

bool same_bits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

}  // namespace

TEST_CASE("pack_bits layout") {
    CHECK(pack_bits(std::vector<float>(32, 1.0f)).words == std::vector<std::uint32_t>{0xFFFFFFFFu});
    CHECK(pack_bits(std::vector<float>(32, -1.0f)).words == std::vector<std::uint32_t>{0x00000000u});
    std::vector<float> alternating(32);
    for (std::size_t e = 0; e < 32; ++e) alternating[e] = e % 2 == 0 ? 1.0f : -1.0f;
    CHECK(pack_bits(alternating).words == std::vector<std::uint32_t>{0x55555555u});
    std::vector<float> second_word(64, -1.0f);
    second_word[33] = 1.0f;
    CHECK(pack_bits(second_word).words == std::vector<std::uint32_t>{0u, 0x2u});
}

TEST_CASE("pack_bits rejects bad input") {
    CHECK_THROWS_AS(pack_bits(std::vector<float>(31, 1.0f)), InvalidArgument);
    CHECK_THROWS_AS(pack_bits(std::vector<float>{}), InvalidArgument);
    std::vector<float> not_sign(32, 1.0f);
    not_sign[3] = 0.5f;
    CHECK_THROWS_AS(pack_bits(not_sign), InvalidArgument);
}

TEST_CASE("packed_dot identical and antipodal vectors") {
    std::mt19937_64 rng(21);
    const auto a = pack_bits(random_signs(64, rng));
    PackedVector inverted = a;
    for (auto& w : inverted.words) w = ~w;
    CHECK(packed_dot(a, a) == 64);
    CHECK(packed_dot(a, inverted) == -64);
}

TEST_CASE("packed_dot length mismatch") {
    const std::vector<std::uint32_t> a(2, 0u), b(3, 0u);
    CHECK_THROWS_AS(packed_dot(a, b), InvalidArgument);
}

TEST_CASE("packed_dot equals the elementwise sign oracle at n = 32") {
    std::mt19937_64 rng(22);
    for (int k = 0; k < 100000; ++k) {
        const auto a = random_signs(32, rng);
        const auto b = random_signs(32, rng);
        const int got = packed_dot(pack_bits(a), pack_bits(b));
        REQUIRE(got == elementwise_sign_dot(a, b));
    }
}

TEST_CASE("packed_dot identity, range, parity and symmetry at larger lengths (property)") {
    std::mt19937_64 rng(23);
    for (std::size_t n : {64u, 96u, 128u, 256u, 288u, 512u, 1024u}) {
        for (int k = 0; k < 500; ++k) {
            const auto a = random_signs(n, rng);
            const auto b = random_signs(n, rng);
            const auto pa = pack_bits(a);
            const auto pb = pack_bits(b);
            const int d = packed_dot(pa, pb);
            REQUIRE(d == elementwise_sign_dot(a, b));
            REQUIRE(d == oracle::sign_dot_from_bits(pa.words, pb.words));
            REQUIRE(d == packed_dot(pb, pa));
            REQUIRE(std::abs(d) <= static_cast<int>(n));
            REQUIRE((static_cast<int>(n) - d) % 2 == 0);
        }
    }
}

TEST_CASE("portable and SIMD kernels agree bit-for-bit") {
    __builtin_cpu_init();
    if (!(__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") && __builtin_cpu_supports("popcnt"))) {
        MESSAGE("AVX2 not available; only the portable kernels are exercised");
        return;
    }
    std::mt19937_64 rng(24);
    std::uniform_int_distribution<std::uint32_t> word;
    for (std::size_t n : {32u, 64u, 128u, 256u, 512u, 1024u, 1056u}) {
        std::vector<float> a(n), b(n);
        for (int k = 0; k < 200; ++k) {
            oracle::fill_normal(a, rng, 1.0f);
            oracle::fill_normal(b, rng, 1.0f);
            REQUIRE(same_bits(simd::dense_dot_avx2(a.data(), b.data(), n),
                              simd::dense_dot_portable(a.data(), b.data(), n)));
            std::vector<std::uint32_t> wa(n / 32), wb(n / 32);
            for (auto& w : wa) w = word(rng);
            for (auto& w : wb) w = word(rng);
            REQUIRE(simd::packed_dot_avx2(wa.data(), wb.data(), wa.size()) ==
                    simd::packed_dot_portable(wa.data(), wb.data(), wa.size()));
        }
    }
}

TEST_CASE("dense_dot is close to the naive oracle") {
    std::mt19937_64 rng(25);
    for (std::size_t n : {32u, 128u, 1024u}) {
        std::vector<float> a(n), b(n);
        oracle::fill_normal(a, rng, 1.0f);
        oracle::fill_normal(b, rng, 1.0f);
        double magnitude = 0.0;
        for (std::size_t e = 0; e < n; ++e) magnitude += std::fabs(a[e] * b[e]);
        CHECK(std::fabs(dense_dot(a, b) - oracle::naive_dot(a, b)) <= 1e-5 * magnitude);
    }
    CHECK_THROWS_AS(dense_dot(std::vector<float>(32), std::vector<float>(64)), InvalidArgument);
}

TEST_CASE("predict_packed examples") {
    std::mt19937_64 rng(26);
    PackedModel p(32, 1, 1);
    const auto bits = pack_bits(random_signs(32, rng));
    p.user_bits(0)[0] = bits.words[0];
    p.item_bits(0)[0] = bits.words[0];
    p.user_scales()[0] = 1.0f;
    p.item_scales()[0] = 1.0f;
    CHECK(predict_packed(p, 0, 0) == 32.0f);

    p.user_scales()[0] = 0.0f;
    p.user_bias()[0] = 0.5f;
    p.item_bias()[0] = 0.25f;
    p.item_bits(0)[0] = ~bits.words[0];
    CHECK(predict_packed(p, 0, 0) == 0.75f);
}

TEST_CASE("score_all agrees bit-exactly with per-item prediction") {
    std::mt19937_64 rng(27);
    for (std::size_t dim : {32u, 64u, 256u, 1024u}) {
        auto dense = oracle::random_dense(dim, 3, 37, rng);
        const auto packed = binarize(dense);
        std::vector<float> out(37);
        for (Index u = 0; u < 3; ++u) {
            score_all(dense, u, out);
            for (Index i = 0; i < 37; ++i) REQUIRE(same_bits(out[i], predict_dense(dense, u, i)));
            score_all(packed, u, out);
            for (Index i = 0; i < 37; ++i) REQUIRE(same_bits(out[i], predict_packed(packed, u, i)));
        }
        dense.set_mode(Representation::binary);
        score_all(dense, 1, out);
        for (Index i = 0; i < 37; ++i) REQUIRE(same_bits(out[i], predict_binary_float(dense, 1, i)));

        std::vector<float> packed_out(37);
        score_all(packed, 1, packed_out);
        for (Index i = 0; i < 37; ++i) CHECK(oracle::relative_error(out[i], packed_out[i]) <= 1e-4);
    }
}

TEST_CASE("score_all on a three-item catalog, item ranges and purity") {
    std::mt19937_64 rng(28);
    const auto dense = oracle::random_dense(32, 1, 3, rng);
    std::vector<float> out(3);
    score_all(dense, 0, out);
    for (Index i = 0; i < 3; ++i) CHECK(out[i] == predict_dense(dense, 0, i));
    std::vector<float> again(3);
    score_all(dense, 0, again);
    CHECK(again == out);

    std::vector<float> tail(2);
    score_all(dense, 0, tail, 1);
    CHECK(tail[0] == out[1]);
    CHECK(tail[1] == out[2]);

    std::vector<float> too_long(4);
    CHECK_THROWS_AS(score_all(dense, 0, too_long), InvalidArgument);
    CHECK_THROWS_AS(score_all(dense, 0, tail, 2), InvalidArgument);
    CHECK_THROWS_AS(score_all(binarize(dense), 0, too_long), InvalidArgument);
}

TEST_CASE("top_k orders by score with index tie-break") {
    const std::vector<float> s{0.1f, 0.9f, 0.5f, 0.9f, -1.0f};
    CHECK(top_k(s, 3) == std::vector<Index>{1, 3, 2});
    CHECK(top_k(s, 10).size() == 5);
    CHECK(top_k(s, 0).empty());
}

TEST_CASE("kernel ISA is reported") {
    const auto isa = kernel_isa();
    CHECK((isa == "avx2" || isa == "portable"));
}
