#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blr/dataset.hpp"
#include "blr/model.hpp"
#include "blr/training.hpp"

namespace blr::cli {

enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, runtime_failure = 3 };

/// Distributions sampled by the random search. Defaults are broad guesses,
/// not tuned values.
struct SearchSpace {
    double lr_min = 1e-4;
    double lr_max = 1e-1;
    double l2_min = 1e-9;
    double l2_max = 1e-3;
    std::vector<std::size_t> minibatch_sizes{128, 256, 512, 1024, 2048};
    std::vector<std::size_t> epochs{5, 10, 20, 30, 50};
    std::vector<Loss> losses{Loss::bpr, Loss::adaptive_hinge};
    std::size_t budget = 30;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Draws `space.budget` configurations. Fields the space does not cover
/// (dim, representation, ...) come from `base`; each trial gets its own
/// training seed.
std::vector<TrainConfig> sample_configs(const SearchSpace& space, const TrainConfig& base);

struct Trial {
    std::size_t index = 0;
    TrainConfig config;
    std::optional<double> mrr;
    std::string error;
};

struct SearchResult {
    std::vector<Trial> trials;
    std::size_t best = 0;
    std::optional<DenseModel> best_model;
};

/// Index of the highest-MRR trial (earliest wins ties). Throws
/// NumericalError when no trial succeeded.
std::size_t best_trial(const std::vector<Trial>& trials);

using TrialSink = std::function<void(const Trial&)>;

/// Fits every sampled config on `train` and scores it by MRR on `test`.
/// Failed trials are recorded and the search continues. Results do not
/// depend on `jobs`.
SearchResult random_search(const InteractionSet& train, const InteractionSet& test, const SearchSpace& space,
                           const TrainConfig& base, std::size_t jobs = 1, const TrialSink& sink = {});

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

std::string trial_to_line(const Trial& trial);
Trial trial_from_line(const std::string& line);

/// FNV-1a over the serialized interaction file, as 16 hex digits.
std::string fingerprint(const InteractionSet& interactions);

InteractionSet read_interactions_file(const std::string& path);
void write_interactions_file(const InteractionSet& interactions, const std::string& path);

/// Runs the `blr` command line. Never throws; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace blr::cli
