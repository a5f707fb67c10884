#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blr/dataset.hpp"
#include "blr/model.hpp"

namespace blr {

/// 1 / rank of `target`, where rank counts the non-excluded items scoring at
/// least as high as the target (ties rank the target last). `excluded` must
/// be sorted and must not contain the target.
double reciprocal_rank(std::span<const float> scores, Index target, std::span<const Index> excluded = {});

struct EvalReport {
    double mrr = 0.0;
    std::size_t num_evaluated = 0;
    std::string excluded_policy;
};

/// Mean reciprocal rank over every (u, i) of `eval_set`, ranking the full
/// catalog with u's training positives removed (the target itself always
/// stays in the ranking).
EvalReport mrr(const DenseModel& model, const InteractionSet& eval_set, const PositiveSets& train_positives);
EvalReport mrr(const PackedModel& model, const InteractionSet& eval_set, const PositiveSets& train_positives);
EvalReport mrr(const AnyModel& model, const InteractionSet& eval_set, const PositiveSets& train_positives);

struct TimingStats {
    double mean_ms = 0.0;
    double min_ms = 0.0;
    double stddev_ms = 0.0;
    /// Items scored per millisecond, num_items / mean_ms.
    double ppms = 0.0;
    double checksum = 0.0;
};

/// Scores `[0, num_items)` into the supplied buffer.
using CatalogScorer = std::function<void(std::span<float>)>;

/// Times `repetitions` calls of `scorer` after one untimed warm-up call.
TimingStats benchmark_ppms(const CatalogScorer& scorer, std::size_t num_items, std::size_t repetitions);

enum class FootprintKind { dense, binary };

struct MemoryFootprint {
    std::size_t dense_bytes = 0;
    std::size_t binary_bytes = 0;
    double ratio = 0.0;
};

/// Bytes per entity: dense 4n + 4 (factors and bias), binary n/8 + 4 + 4
/// (bits, scale and bias).
std::size_t memory_footprint(FootprintKind kind, std::size_t dim);
MemoryFootprint memory_footprint(std::size_t dim);

struct BenchConfig {
    std::size_t dim = 32;
    std::size_t num_items = 100'000;
    std::size_t repetitions = 500;
    std::uint64_t seed = 42;
};

struct BenchReport {
    std::size_t dim = 0;
    double ppms_dense = 0.0;
    double ppms_packed = 0.0;
    double ppms_ratio = 0.0;
    std::size_t bytes_per_pair_dense = 0;
    std::size_t bytes_per_pair_binary = 0;
    double memory_ratio = 0.0;
    std::size_t repetitions = 0;
    std::size_t items_per_rep = 0;
    TimingStats dense_timing;
    TimingStats packed_timing;
};

/// Builds a one-user model with `num_items` Normal(0, 1) items at the given
/// dimension, binarizes it, and measures both scoring paths.
BenchReport run_benchmark(const BenchConfig& config);

// Line-delimited report records, one JSON object per line with the fixed
// field names dim, mrr, ppms_dense, ppms_packed, ppms_ratio, memory_ratio.
struct ReportRow {
    std::size_t dim = 0;
    std::string label;
    std::optional<double> mrr;
    std::optional<double> ppms_dense;
    std::optional<double> ppms_packed;
    std::optional<double> ppms_ratio;
    std::optional<double> memory_ratio;
};

ReportRow to_row(const BenchReport& report);
std::string to_line(const ReportRow& row);
ReportRow parse_line(const std::string& line);

/// Fixed-width table, one row per dimension: MRR, binary MRR and their ratio,
/// dense and packed PPMS, PPMS ratio and memory ratio. Missing values print as '-'.
std::string render_table(std::span<const ReportRow> rows);

}  // namespace blr
