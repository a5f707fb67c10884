// Acceptance suite: one PASS/FAIL line per criterion.
//
//   blr_acceptance            run criteria 1-5, 7, 8 (6 runs only when BLR_ML1M_PATH is set)
//   blr_acceptance 6 7        run the listed criteria
//
// Exit status 0 when every criterion that ran passed, 1 otherwise, and 77 when
// everything requested was skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "blr/evalbench.hpp"
#include "blr/kernels.hpp"
#include "blr/training.hpp"
#include "cli.hpp"
#include "oracles.hpp"

using namespace blr;

namespace {

// Tolerances and workload sizes.
constexpr std::size_t kDims[] = {32, 64, 128, 256, 512, 1024};
constexpr std::size_t kKernelPairsPerDim = 100'000;

constexpr double kMemoryRatios[] = {0.091, 0.062, 0.047, 0.039, 0.035, 0.033};

constexpr std::size_t kEquivalenceModels = 1'000;
constexpr double kEquivalenceRelTol = 1e-4;

constexpr std::size_t kMinGradientTriplets = 100;
constexpr double kGradientRelTol = 1e-4;
constexpr double kFiniteDifferenceStep = 1e-3;
constexpr double kHingeKinkMargin = 1e-2;

constexpr std::size_t kMrrInstances = 10;
constexpr std::size_t kMrrUsers = 100;
constexpr std::size_t kMrrItems = 100;

constexpr std::size_t kMl1mTrials = 30;
constexpr double kMl1mDenseMrrFloor = 0.06;
constexpr double kMl1mRatioLow = 0.5;
constexpr double kMl1mRatioHigh = 1.0;

constexpr std::size_t kBenchItems = 100'000;
constexpr std::size_t kBenchReps = 50;
constexpr double kMinPpmsRatioAt1024 = 5.0;
constexpr double kMinPpmsRatioAt32 = 1.5;

struct Outcome {
    enum Status { pass, fail, skip } status;
    std::string detail;
};

std::string fmt(double x, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << x;
    return os.str();
}

// ------------------------------------------------------------------ 1

Outcome kernel_exactness() {
    std::mt19937_64 rng(1);
    std::size_t mismatches = 0;
    for (std::size_t dim : kDims) {
        std::vector<float> a(dim), b(dim);
        for (std::size_t k = 0; k < kKernelPairsPerDim; ++k) {
            for (std::size_t e = 0; e < dim; e += 64) {
                const std::uint64_t ra = rng(), rb = rng();
                for (std::size_t bit = 0; bit < 64 && e + bit < dim; ++bit) {
                    a[e + bit] = (ra >> bit) & 1u ? 1.0f : -1.0f;
                    b[e + bit] = (rb >> bit) & 1u ? 1.0f : -1.0f;
                }
            }
            int expected = 0;
            for (std::size_t e = 0; e < dim; ++e) expected += static_cast<int>(a[e]) * static_cast<int>(b[e]);
            if (packed_dot(pack_bits(a), pack_bits(b)) != expected) ++mismatches;
        }
    }
    return {mismatches == 0 ? Outcome::pass : Outcome::fail,
            std::to_string(kKernelPairsPerDim) + " pairs x 6 dims, " + std::to_string(mismatches) + " mismatches"};
}

// ------------------------------------------------------------------ 2

Outcome memory_ratios() {
    std::ostringstream got;
    bool ok = true;
    for (std::size_t k = 0; k < std::size(kDims); ++k) {
        const double r = std::round(memory_footprint(kDims[k]).ratio * 1000.0) / 1000.0;
        ok = ok && r == kMemoryRatios[k];
        got << (k ? " " : "") << std::fixed << std::setprecision(3) << r;
    }
    return {ok ? Outcome::pass : Outcome::fail, "ratios " + got.str()};
}

// ------------------------------------------------------------------ 3

Outcome cross_path_equivalence() {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    double worst_oracle = 0.0;
    std::size_t pairs = 0;
    for (std::size_t k = 0; k < kEquivalenceModels; ++k) {
        const std::size_t dim = kDims[k % std::size(kDims)];
        const auto m = oracle::random_dense(dim, 4, 16, rng, 1.0f, Representation::binary);
        const auto p = binarize(m);
        for (Index u = 0; u < 4; ++u) {
            for (Index i = 0; i < 16; ++i) {
                const double a = predict_binary_float(m, u, i);
                worst = std::max(worst, oracle::relative_error(a, predict_packed(p, u, i)));
                // Independent double-precision oracle; absolute below unit magnitude.
                const double ref = oracle::binary_score(m, u, i);
                worst_oracle = std::max(worst_oracle, std::fabs(a - ref) / std::max(1.0, std::fabs(ref)));
                ++pairs;
            }
        }
    }
    const bool ok = worst <= kEquivalenceRelTol && worst_oracle <= kEquivalenceRelTol;
    return {ok ? Outcome::pass : Outcome::fail, std::to_string(kEquivalenceModels) + " models, " +
                                                    std::to_string(pairs) + " pairs, max rel err " + fmt(worst) +
                                                    " (vs double oracle " + fmt(worst_oracle) + ")"};
}

// ------------------------------------------------------------------ 4

Outcome gradient_checks() {
    std::mt19937_64 rng(4);
    std::map<Loss, std::size_t> checked;
    double worst = 0.0;
    for (Loss loss : {Loss::bpr, Loss::adaptive_hinge}) {
        for (int trial = 0; checked[loss] < kMinGradientTriplets && trial < 10'000; ++trial) {
            const auto m = oracle::random_dense(32, 3, 5, rng, 0.4f);
            TrainConfig c;
            c.loss = loss;
            c.bpr_form = trial % 2 == 0 ? BprForm::one_minus_sigmoid : BprForm::neg_log_sigmoid;
            c.l2 = trial % 3 == 0 ? 0.0 : 0.01;
            const Index u = trial % 3, i = trial % 5, j = (trial + 2) % 5;
            if (loss == Loss::adaptive_hinge) {
                const double x = predict_dense(m, u, i) - predict_dense(m, u, j);
                // Skip the kink and the flat region, where differences say nothing.
                if (std::fabs(1.0 - x) < kHingeKinkMargin || x > 1.0) continue;
            }
            const auto numeric = oracle::finite_difference_gradient(oracle::triplet_of(m, u, i, j), c,
                                                                    kFiniteDifferenceStep);
            const auto analytic = oracle::flatten(grad_triplet(m, c, u, i, j));
            std::vector<double> diff(numeric.size());
            for (std::size_t k = 0; k < numeric.size(); ++k) diff[k] = analytic[k] - numeric[k];
            worst = std::max(worst, oracle::norm(diff) / std::max(oracle::norm(numeric), 1e-12));
            ++checked[loss];
        }
    }

    std::size_t masked = 0, leaks = 0;
    for (Loss loss : {Loss::bpr, Loss::adaptive_hinge}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto m = oracle::random_dense(64, 2, 3, rng, 1.2f, Representation::binary);
            TrainConfig c;
            c.representation = Representation::binary;
            c.scale_gradient = ScaleGradient::detached;
            c.loss = loss;
            const auto g = grad_triplet(m, c, 0, 1, 2);
            for (std::size_t e = 0; e < 64; ++e) {
                const std::pair<float, float> rows[] = {{m.user_factors(0)[e], g.user[e]},
                                                        {m.item_factors(1)[e], g.positive[e]},
                                                        {m.item_factors(2)[e], g.negative[e]}};
                for (auto [w, grad] : rows) {
                    if (std::fabs(w) > 1.0f) {
                        ++masked;
                        if (grad != 0.0f) ++leaks;
                    }
                }
            }
        }
    }

    const bool ok = checked[Loss::bpr] >= kMinGradientTriplets && checked[Loss::adaptive_hinge] >= kMinGradientTriplets &&
                    worst <= kGradientRelTol && masked > 0 && leaks == 0;
    return {ok ? Outcome::pass : Outcome::fail,
            std::to_string(checked[Loss::bpr]) + " bpr + " + std::to_string(checked[Loss::adaptive_hinge]) +
                " hinge triplets, max rel err " + fmt(worst) + "; binary mask: " + std::to_string(masked) +
                " coords outside [-1,1], " + std::to_string(leaks) + " nonzero"};
}

// ------------------------------------------------------------------ 5

double brute_force_mrr(const DenseModel& m, const InteractionSet& eval, const InteractionSet& train) {
    std::vector<std::set<Index>> train_pos(m.num_users());
    for (std::size_t k = 0; k < train.size(); ++k) train_pos[train.user_ids()[k]].insert(train.item_ids()[k]);
    double total = 0.0;
    for (std::size_t k = 0; k < eval.size(); ++k) {
        const Index u = eval.user_ids()[k];
        const Index target = eval.item_ids()[k];
        std::vector<float> scores(m.num_items());
        for (Index i = 0; i < m.num_items(); ++i) scores[i] = predict(m, u, i);
        auto excluded = train_pos[u];
        excluded.erase(target);
        total += oracle::sorted_reciprocal_rank(scores, target, excluded);
    }
    return total / static_cast<double>(eval.size());
}

Outcome mrr_oracle() {
    std::mt19937_64 rng(5);
    std::size_t compared = 0, mismatches = 0;
    for (std::size_t trial = 0; trial < kMrrInstances; ++trial) {
        std::uniform_int_distribution<Index> pu(0, kMrrUsers - 1), pi(0, kMrrItems - 1);
        std::set<std::pair<Index, Index>> seen;
        while (seen.size() < 2000) seen.emplace(pu(rng), pi(rng));
        std::vector<Index> tu, ti, eu, ei;
        std::bernoulli_distribution to_eval(0.25);
        for (auto [u, i] : seen) {
            auto& us = to_eval(rng) ? eu : tu;
            auto& is = &us == &eu ? ei : ti;
            us.push_back(u);
            is.push_back(i);
        }
        const InteractionSet train(tu, ti, kMrrUsers, kMrrItems), eval(eu, ei, kMrrUsers, kMrrItems);
        const PositiveSets positives(train);
        for (Representation mode : {Representation::dense, Representation::binary}) {
            // Coarse weights make ties common.
            auto m = oracle::random_dense(32, kMrrUsers, kMrrItems, rng, 1.0f, mode);
            if (trial % 2 == 1) {
                for (auto& w : m.all_item_factors()) w = std::round(w * 2.0f) / 2.0f;
            }
            const double expected = brute_force_mrr(m, eval, train);
            if (mrr(m, eval, positives).mrr != expected) ++mismatches;
            ++compared;
            if (mode == Representation::binary) {
                if (mrr(binarize(m), eval, positives).mrr != expected) ++mismatches;
                ++compared;
            }
        }
    }
    return {mismatches == 0 ? Outcome::pass : Outcome::fail,
            std::to_string(compared) + " comparisons on 100x100 instances, " + std::to_string(mismatches) +
                " mismatches"};
}

// ------------------------------------------------------------------ 6

Outcome ml1m_accuracy() {
    const char* path = std::getenv("BLR_ML1M_PATH");
    if (path == nullptr || *path == '\0') return {Outcome::skip, "set BLR_ML1M_PATH to ratings.dat to run"};
    std::ifstream in(path);
    if (!in) return {Outcome::fail, std::string("cannot open ") + path};
    const auto all = parse_movielens(in);
    const auto parts = split(all, SplitSpec{0.8, 0.1, 0.1, 42});

    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    if (const char* j = std::getenv("BLR_JOBS")) jobs = std::max(1, std::atoi(j));

    const PositiveSets train_positives(parts.train);
    auto searched_mrr = [&](Representation representation) {
        cli::SearchSpace space;
        space.budget = kMl1mTrials;
        space.seed = 42;
        TrainConfig base;
        base.dim = 32;
        base.representation = representation;
        auto result = cli::random_search(parts.train, parts.test, space, base, jobs, [&](const cli::Trial& t) {
            std::cerr << "  [" << to_string(representation) << "] trial " << t.index + 1 << "/" << kMl1mTrials
                      << (t.mrr ? " test mrr " + fmt(*t.mrr) : " failed: " + t.error) << '\n';
        });
        return mrr(*result.best_model, parts.validation, train_positives).mrr;
    };
    const double dense = searched_mrr(Representation::dense);
    const double binary = searched_mrr(Representation::binary);
    const double ratio = binary / dense;
    const bool ok = dense >= kMl1mDenseMrrFloor && binary < dense && ratio >= kMl1mRatioLow && ratio <= kMl1mRatioHigh;
    return {ok ? Outcome::pass : Outcome::fail, std::to_string(all.size()) + " interactions; validation mrr dense " +
                                                    fmt(dense) + ", binary " + fmt(binary) + ", ratio " + fmt(ratio)};
}

// ------------------------------------------------------------------ 7

Outcome throughput() {
    std::vector<double> dense, ratio;
    std::ostringstream detail;
    for (std::size_t dim : kDims) {
        const auto r = run_benchmark(BenchConfig{dim, kBenchItems, kBenchReps, 42});
        dense.push_back(r.ppms_dense);
        ratio.push_back(r.ppms_ratio);
        detail << (dim == kDims[0] ? "" : ", ") << dim << ": " << std::fixed << std::setprecision(0) << r.ppms_dense
               << "/" << r.ppms_packed << " ppms x" << std::setprecision(2) << r.ppms_ratio;
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < dense.size(); ++k) decreasing = decreasing && dense[k] < dense[k - 1];
    const bool ok = ratio.back() >= kMinPpmsRatioAt1024 && ratio.front() >= kMinPpmsRatioAt32 && decreasing;
    return {ok ? Outcome::pass : Outcome::fail,
            std::string("dense/packed ") + detail.str() + (decreasing ? "" : "; dense PPMS not decreasing")};
}

// ------------------------------------------------------------------ 8

Outcome toy_convergence() {
    const InteractionSet toy({0, 0, 1, 1, 2, 2, 3, 3}, {0, 1, 0, 1, 2, 3, 2, 3}, 4, 4);
    const PositiveSets positives(toy);
    TrainConfig c;
    c.dim = 32;
    c.learning_rate = 0.05;
    c.minibatch_size = 2;
    c.epochs = 100;
    c.seed = 7;
    const double dense_mrr = mrr(fit(toy, positives, c).model, toy, positives).mrr;

    c.representation = Representation::binary;
    const auto binary = fit(toy, positives, c);
    const auto& epochs = binary.report.epochs;
    // Trend: least-squares slope of loss against epoch, and first vs last tenth.
    const double n = static_cast<double>(epochs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& e : epochs) {
        const double x = static_cast<double>(e.epoch);
        sx += x;
        sy += e.mean_loss;
        sxx += x * x;
        sxy += x * e.mean_loss;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const std::size_t tenth = epochs.size() / 10;
    double head = 0, tail = 0;
    for (std::size_t k = 0; k < tenth; ++k) {
        head += epochs[k].mean_loss / tenth;
        tail += epochs[epochs.size() - 1 - k].mean_loss / tenth;
    }
    const bool ok = dense_mrr == 1.0 && slope < 0.0 && tail < head;
    return {ok ? Outcome::pass : Outcome::fail, "dense held-in mrr " + fmt(dense_mrr) + "; binary loss " + fmt(head) +
                                                    " -> " + fmt(tail) + ", slope " + fmt(slope, 3)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"kernel exactness", kernel_exactness},
        {"memory ratios", memory_ratios},
        {"cross-path prediction equivalence", cross_path_equivalence},
        {"gradient checks", gradient_checks},
        {"mrr oracle equivalence", mrr_oracle},
        {"ml-1m accuracy", ml1m_accuracy},
        {"throughput ordering", throughput},
        {"toy convergence", toy_convergence},
    };

    std::vector<std::size_t> selected;
    for (int a = 1; a < argc; ++a) {
        const int k = std::atoi(argv[a]);
        if (k < 1 || k > static_cast<int>(criteria.size())) {
            std::cerr << "unknown criterion '" << argv[a] << "'\n";
            return 2;
        }
        selected.push_back(static_cast<std::size_t>(k));
    }
    if (selected.empty()) {
        for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(k);
    }

    std::size_t ran = 0, failed = 0;
    for (std::size_t k : selected) {
        const auto& [name, check] = criteria[k - 1];
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome = {Outcome::fail, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = outcome.status == Outcome::pass ? "PASS" : outcome.status == Outcome::fail ? "FAIL" : "SKIP";
        std::cout << tag << "  " << k << ". " << name << ": " << outcome.detail << " [" << std::fixed
                  << std::setprecision(1) << seconds << "s]" << std::endl;
        if (outcome.status != Outcome::skip) ++ran;
        if (outcome.status == Outcome::fail) ++failed;
    }
    if (ran == 0) return 77;
    return failed == 0 ? 0 : 1;
}
