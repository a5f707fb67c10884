#include "blr/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blr/error.hpp"
#include "blr/kernels.hpp"

namespace blr {

namespace {

constexpr const char* kExclusionPolicy = "train_positives_excluded_target_kept";

template <typename Model>
EvalReport mrr_impl(const Model& model, const InteractionSet& eval_set, const PositiveSets& train_positives) {
    if (eval_set.empty()) throw DataError("evaluation set is empty");
    if (eval_set.num_items() != model.num_items() || eval_set.num_users() != model.num_users() ||
        train_positives.num_users() != model.num_users()) {
        throw InvalidArgument("evaluation set, training positives and model have different id spaces");
    }

    const PositiveSets by_user(eval_set);
    std::vector<float> scores(model.num_items());
    std::vector<Index> excluded;
    double total = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t uu = 0; uu < by_user.num_users(); ++uu) {
        const auto u = static_cast<Index>(uu);
        const auto targets = by_user.items(u);
        if (targets.empty()) continue;
        score_all(model, u, scores);
        const auto positives = train_positives.items(u);
        for (Index target : targets) {
            std::span<const Index> skip = positives;
            if (std::binary_search(positives.begin(), positives.end(), target)) {
                excluded.clear();
                std::copy_if(positives.begin(), positives.end(), std::back_inserter(excluded),
                             [&](Index j) { return j != target; });
                skip = excluded;
            }
            total += reciprocal_rank(scores, target, skip);
            ++evaluated;
        }
    }
    return EvalReport{total / static_cast<double>(evaluated), evaluated, kExclusionPolicy};
}

std::string format_number(const std::optional<double>& v, int precision, bool grouped = false) {
    if (!v) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << *v;
    std::string s = os.str();
    if (grouped) {
        const auto dot = s.find('.');
        auto int_end = dot == std::string::npos ? s.size() : dot;
        for (auto pos = int_end; pos > 3; pos -= 3) {
            if (s[pos - 4] == '-') break;
            s.insert(pos - 3, ",");
        }
    }
    return s;
}

}  // namespace

double reciprocal_rank(std::span<const float> scores, Index target, std::span<const Index> excluded) {
    if (target >= scores.size()) throw InvalidArgument("target item outside the score buffer");
    if (std::binary_search(excluded.begin(), excluded.end(), target)) {
        throw InvalidArgument("target item is in the excluded set");
    }
    const float t = scores[target];
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j != target && scores[j] >= t) ++ahead;
    }
    for (Index j : excluded) {
        if (j < scores.size() && scores[j] >= t) --ahead;
    }
    return 1.0 / static_cast<double>(ahead + 1);
}

EvalReport mrr(const DenseModel& model, const InteractionSet& eval_set, const PositiveSets& train_positives) {
    return mrr_impl(model, eval_set, train_positives);
}

EvalReport mrr(const PackedModel& model, const InteractionSet& eval_set, const PositiveSets& train_positives) {
    return mrr_impl(model, eval_set, train_positives);
}

EvalReport mrr(const AnyModel& model, const InteractionSet& eval_set, const PositiveSets& train_positives) {
    return std::visit([&](const auto& m) { return mrr_impl(m, eval_set, train_positives); }, model);
}

TimingStats benchmark_ppms(const CatalogScorer& scorer, std::size_t num_items, std::size_t repetitions) {
    if (num_items == 0) throw InvalidArgument("benchmark needs at least one item");
    if (repetitions == 0) throw InvalidArgument("benchmark needs at least one repetition");

    std::vector<float> out(num_items);
    scorer(out);  // warm-up
    double checksum = 0.0;
    std::vector<double> times_ms;
    times_ms.reserve(repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        scorer(out);
        const auto stop = std::chrono::steady_clock::now();
        times_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        checksum += out[rep % num_items] + out[num_items - 1];
    }

    TimingStats stats;
    double sum = 0.0;
    for (double t : times_ms) sum += t;
    stats.mean_ms = sum / static_cast<double>(repetitions);
    stats.min_ms = *std::min_element(times_ms.begin(), times_ms.end());
    double var = 0.0;
    for (double t : times_ms) var += (t - stats.mean_ms) * (t - stats.mean_ms);
    stats.stddev_ms = std::sqrt(var / static_cast<double>(repetitions));
    stats.ppms = static_cast<double>(num_items) / std::max(stats.mean_ms, 1e-9);
    stats.checksum = checksum;
    return stats;
}

std::size_t memory_footprint(FootprintKind kind, std::size_t dim) {
    check_dim(dim);
    constexpr std::size_t kFloatBytes = sizeof(float);
    if (kind == FootprintKind::dense) return kFloatBytes * dim + kFloatBytes;
    return dim / 8 + kFloatBytes + kFloatBytes;
}

MemoryFootprint memory_footprint(std::size_t dim) {
    MemoryFootprint fp;
    fp.dense_bytes = memory_footprint(FootprintKind::dense, dim);
    fp.binary_bytes = memory_footprint(FootprintKind::binary, dim);
    fp.ratio = static_cast<double>(fp.binary_bytes) / static_cast<double>(fp.dense_bytes);
    return fp;
}

BenchReport run_benchmark(const BenchConfig& config) {
    check_dim(config.dim);
    if (config.num_items == 0) throw InvalidArgument("benchmark needs at least one item");

    DenseModel dense(config.dim, 1, config.num_items);
    {
        std::mt19937_64 rng(config.seed);
        std::normal_distribution<float> normal(0.0f, 1.0f);
        for (auto& w : dense.all_user_factors()) w = normal(rng);
        for (auto& w : dense.all_item_factors()) w = normal(rng);
        for (auto& b : dense.user_bias()) b = normal(rng);
        for (auto& b : dense.item_bias()) b = normal(rng);
    }
    const PackedModel packed = binarize(dense);

    BenchReport report;
    report.dim = config.dim;
    report.repetitions = config.repetitions;
    report.items_per_rep = config.num_items;
    report.dense_timing =
        benchmark_ppms([&](std::span<float> out) { score_all(dense, 0, out); }, config.num_items, config.repetitions);
    report.packed_timing = benchmark_ppms([&](std::span<float> out) { score_all(packed, 0, out); }, config.num_items,
                                          config.repetitions);
    report.ppms_dense = report.dense_timing.ppms;
    report.ppms_packed = report.packed_timing.ppms;
    report.ppms_ratio = report.ppms_packed / report.ppms_dense;

    const auto fp = memory_footprint(config.dim);
    report.bytes_per_pair_dense = fp.dense_bytes;
    report.bytes_per_pair_binary = fp.binary_bytes;
    report.memory_ratio = fp.ratio;
    return report;
}

ReportRow to_row(const BenchReport& report) {
    ReportRow row;
    row.dim = report.dim;
    row.label = "bench";
    row.ppms_dense = report.ppms_dense;
    row.ppms_packed = report.ppms_packed;
    row.ppms_ratio = report.ppms_ratio;
    row.memory_ratio = report.memory_ratio;
    return row;
}

std::string to_line(const ReportRow& row) {
    nlohmann::ordered_json j;
    j["dim"] = row.dim;
    if (!row.label.empty()) j["label"] = row.label;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("mrr", row.mrr);
    put("ppms_dense", row.ppms_dense);
    put("ppms_packed", row.ppms_packed);
    put("ppms_ratio", row.ppms_ratio);
    put("memory_ratio", row.memory_ratio);
    return j.dump();
}

ReportRow parse_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("malformed report line: ") + e.what());
    }
    if (!j.is_object() || !j.contains("dim")) throw DataError("report line lacks a 'dim' field");
    ReportRow row;
    row.dim = j.at("dim").get<std::size_t>();
    row.label = j.value("label", "");
    auto get = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key)) return std::nullopt;
        return j.at(key).get<double>();
    };
    row.mrr = get("mrr");
    row.ppms_dense = get("ppms_dense");
    row.ppms_packed = get("ppms_packed");
    row.ppms_ratio = get("ppms_ratio");
    row.memory_ratio = get("memory_ratio");
    return row;
}

std::string render_table(std::span<const ReportRow> rows) {
    struct Merged {
        std::optional<double> mrr, binary_mrr, ppms, binary_ppms, ppms_ratio, memory_ratio;
    };
    std::map<std::size_t, Merged> by_dim;
    for (const auto& row : rows) {
        auto& m = by_dim[row.dim];
        if (row.mrr) (row.label == "binary" ? m.binary_mrr : m.mrr) = row.mrr;
        if (row.ppms_dense) m.ppms = row.ppms_dense;
        if (row.ppms_packed) m.binary_ppms = row.ppms_packed;
        if (row.ppms_ratio) m.ppms_ratio = row.ppms_ratio;
        if (row.memory_ratio) m.memory_ratio = row.memory_ratio;
    }

    const std::vector<std::pair<std::string, int>> columns{{"Dimension", 9},      {"MRR", 7},        {"Binary MRR", 10},
                                                           {"MRR ratio", 9},      {"PPMS", 11},      {"Binary PPMS", 11},
                                                           {"PPMS ratio", 10},    {"Memory use ratio", 16}};
    std::ostringstream os;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        os << (c ? "  " : "") << std::setw(columns[c].second) << columns[c].first;
    }
    os << '\n';
    for (const auto& [dim, m] : by_dim) {
        std::optional<double> mrr_ratio;
        if (m.mrr && m.binary_mrr && *m.mrr > 0.0) mrr_ratio = *m.binary_mrr / *m.mrr;
        const std::vector<std::string> cells{std::to_string(dim),
                                             format_number(m.mrr, 3),
                                             format_number(m.binary_mrr, 3),
                                             format_number(mrr_ratio, 3),
                                             format_number(m.ppms, 0, true),
                                             format_number(m.binary_ppms, 0, true),
                                             format_number(m.ppms_ratio, 3),
                                             format_number(m.memory_ratio, 3)};
        for (std::size_t c = 0; c < columns.size(); ++c) {
            os << (c ? "  " : "") << std::setw(columns[c].second) << cells[c];
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace blr
