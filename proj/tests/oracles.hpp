#pragma once

// Brute-force reference implementations used as test oracles. None of these
// call into the library's scoring or ranking code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "blr/model.hpp"
#include "blr/training.hpp"

namespace blr::oracle {

inline double naive_dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
    return s;
}

inline int sign_of(float w) { return w >= 0.0f ? 1 : -1; }

/// Reads element e of a packed row bit by bit.
inline int unpack_sign(std::span<const std::uint32_t> words, std::size_t e) {
    return ((words[e / 32] >> (e % 32)) & 1u) ? 1 : -1;
}

inline int sign_dot_from_bits(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    int s = 0;
    for (std::size_t e = 0; e < a.size() * 32; ++e) s += unpack_sign(a, e) * unpack_sign(b, e);
    return s;
}

inline double mean_abs(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += std::fabs(x);
    return s / static_cast<double>(v.size());
}

/// Binary forward evaluated in double from the raw factors.
inline double binary_score(const DenseModel& m, Index u, Index i) {
    const auto uu = m.user_factors(u);
    const auto ii = m.item_factors(i);
    int d = 0;
    for (std::size_t e = 0; e < uu.size(); ++e) d += sign_of(uu[e]) * sign_of(ii[e]);
    return mean_abs(uu) * mean_abs(ii) * d + m.user_bias()[u] + m.item_bias()[i];
}

inline double dense_score(const DenseModel& m, Index u, Index i) {
    return naive_dot(m.user_factors(u), m.item_factors(i)) + m.user_bias()[u] + m.item_bias()[i];
}

/// Sort-based reciprocal rank: rank the non-excluded items by descending
/// score, placing the target after every item with an equal score.
inline double sorted_reciprocal_rank(std::span<const float> scores, Index target, const std::set<Index>& excluded) {
    std::vector<std::pair<float, int>> ranked;  // (score, is_target)
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j != target && excluded.count(static_cast<Index>(j))) continue;
        ranked.emplace_back(scores[j], j == target ? 1 : 0);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
        if (ranked[pos].second) return 1.0 / static_cast<double>(pos + 1);
    }
    return 0.0;
}

/// Dense-mode triplet objective in double precision:
/// loss(r_ui - r_uj) + (l2 / 2) * sum of squared touched parameters.
struct DenseTriplet {
    std::vector<double> user, pos, neg;
    double bu = 0, bi = 0, bj = 0;
};

inline double dense_objective(const DenseTriplet& t, Loss loss, BprForm form, double l2) {
    double r_ui = t.bu + t.bi;
    double r_uj = t.bu + t.bj;
    double sq = t.bu * t.bu + t.bi * t.bi + t.bj * t.bj;
    for (std::size_t e = 0; e < t.user.size(); ++e) {
        r_ui += t.user[e] * t.pos[e];
        r_uj += t.user[e] * t.neg[e];
        sq += t.user[e] * t.user[e] + t.pos[e] * t.pos[e] + t.neg[e] * t.neg[e];
    }
    const double x = r_ui - r_uj;
    double value = 0.0;
    if (loss == Loss::adaptive_hinge) {
        value = std::max(0.0, 1.0 - x);
    } else if (form == BprForm::one_minus_sigmoid) {
        value = 1.0 - 1.0 / (1.0 + std::exp(-x));
    } else {
        value = std::log1p(std::exp(-x));
    }
    return value + 0.5 * l2 * sq;
}

inline void fill_normal(std::span<float> values, std::mt19937_64& rng, float stddev) {
    std::normal_distribution<float> normal(0.0f, stddev);
    for (auto& v : values) v = normal(rng);
}

inline DenseModel random_dense(std::size_t dim, std::size_t users, std::size_t items, std::mt19937_64& rng,
                               float stddev = 1.0f, Representation mode = Representation::dense) {
    DenseModel m(dim, users, items, mode);
    fill_normal(m.all_user_factors(), rng, stddev);
    fill_normal(m.all_item_factors(), rng, stddev);
    fill_normal(m.user_bias(), rng, stddev);
    fill_normal(m.item_bias(), rng, stddev);
    return m;
}

inline double relative_error(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-12});
    return std::fabs(a - b) / scale;
}

inline double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Central finite differences of the double-precision dense objective over
/// every parameter touched by the triplet, in grad_triplet's layout.
inline std::vector<double> finite_difference_gradient(const DenseTriplet& base, const TrainConfig& c, double h) {
    std::vector<double> out;
    auto probe = [&](auto&& param_ref) {
        DenseTriplet plus = base, minus = base;
        param_ref(plus) += h;
        param_ref(minus) -= h;
        out.push_back((dense_objective(plus, c.loss, c.bpr_form, c.l2) -
                       dense_objective(minus, c.loss, c.bpr_form, c.l2)) /
                      (2.0 * h));
    };
    const std::size_t n = base.user.size();
    for (std::size_t e = 0; e < n; ++e) probe([e](DenseTriplet& t) -> double& { return t.user[e]; });
    for (std::size_t e = 0; e < n; ++e) probe([e](DenseTriplet& t) -> double& { return t.pos[e]; });
    for (std::size_t e = 0; e < n; ++e) probe([e](DenseTriplet& t) -> double& { return t.neg[e]; });
    probe([](DenseTriplet& t) -> double& { return t.bu; });
    probe([](DenseTriplet& t) -> double& { return t.bi; });
    probe([](DenseTriplet& t) -> double& { return t.bj; });
    return out;
}

inline std::vector<double> flatten(const TripletGradients& g) {
    std::vector<double> out(g.user.begin(), g.user.end());
    out.insert(out.end(), g.positive.begin(), g.positive.end());
    out.insert(out.end(), g.negative.begin(), g.negative.end());
    out.push_back(g.user_bias);
    out.push_back(g.positive_bias);
    out.push_back(g.negative_bias);
    return out;
}

inline DenseTriplet triplet_of(const DenseModel& m, Index u, Index i, Index j) {
    DenseTriplet t;
    t.user.assign(m.user_factors(u).begin(), m.user_factors(u).end());
    t.pos.assign(m.item_factors(i).begin(), m.item_factors(i).end());
    t.neg.assign(m.item_factors(j).begin(), m.item_factors(j).end());
    t.bu = m.user_bias()[u];
    t.bi = m.item_bias()[i];
    t.bj = m.item_bias()[j];
    return t;
}

}  // namespace blr::oracle
