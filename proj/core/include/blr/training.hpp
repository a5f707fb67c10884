#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "blr/dataset.hpp"
#include "blr/model.hpp"

namespace blr {

enum class Loss { bpr, adaptive_hinge };

/// How the BPR triplet loss is evaluated. `one_minus_sigmoid` minimizes
/// 1 - sigmoid(r_ui - r_uj); `neg_log_sigmoid` is the -log sigmoid form.
enum class BprForm { one_minus_sigmoid, neg_log_sigmoid };

/// Whether the binary forward backpropagates into the L1-mean scales
/// (`through_scales`) or treats them as constants (`detached`).
enum class ScaleGradient { through_scales, detached };

std::string to_string(Loss loss);
Loss parse_loss(const std::string& s);

using Rng = std::mt19937_64;

struct TrainConfig {
    std::size_t dim = 32;
    Representation representation = Representation::dense;
    Loss loss = Loss::bpr;
    BprForm bpr_form = BprForm::one_minus_sigmoid;
    ScaleGradient scale_gradient = ScaleGradient::through_scales;
    double learning_rate = 0.01;
    double l2 = 0.0;
    std::size_t minibatch_size = 256;
    std::size_t epochs = 10;
    /// Maximum negatives drawn per positive for the adaptive hinge loss.
    std::size_t max_sampled = 5;
    std::uint64_t seed = 42;

    /// Throws InvalidArgument on an inconsistent configuration.
    void validate() const;
};

float sigmoid(float x);

/// 1 - sigmoid(r_ui - r_uj).
float bpr_loss(float r_ui, float r_uj);
/// -log sigmoid(r_ui - r_uj).
float bpr_log_loss(float r_ui, float r_uj);
/// max(0, 1 - r_ui + r_uj).
float hinge_loss(float r_ui, float r_uj);

/// Surrogate derivative of sign: 1 inside [-1, 1], 0 outside.
inline float ste_grad(float w) { return (w >= -1.0f && w <= 1.0f) ? 1.0f : 0.0f; }

/// Adam moments and timestep for one contiguous parameter block.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t size) : m(size, 0.0f), v(size, 0.0f) {}
};

/// One bias-corrected Adam update over the whole block. Throws NumericalError
/// on a non-finite gradient.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr);

/// Sparse variant: advances the timestep once, then updates only the listed
/// rows. `grads` holds one row of `row_len` values per entry of `rows`.
void adam_step_rows(std::span<float> params, std::span<const float> grads, std::span<const Index> rows,
                    std::size_t row_len, AdamState& state, double lr);

/// Draws a negative for (u, i). Candidates are uniform over the catalog and
/// positives are rejected (at most 100 rejections per draw). For BPR the first
/// accepted draw is returned. For the adaptive hinge, draws repeat until one
/// violates the margin or `max_sampled` draws were made; the last one is
/// returned. Returns nullopt when no negative could be found.
template <typename Scorer>
std::optional<Index> sample_negative(Index u, const PositiveSets& positives, Scorer&& score, float r_ui, Loss loss,
                                     std::size_t max_sampled, Rng& rng);

struct TripletGradients {
    float loss = 0.0f;
    std::vector<float> user;
    std::vector<float> positive;
    std::vector<float> negative;
    float user_bias = 0.0f;
    float positive_bias = 0.0f;
    float negative_bias = 0.0f;
};

/// Analytic gradients of the triplet objective
///   loss(r_ui, r_uj) + (l2 / 2) * (|u_u|^2 + |i_i|^2 + |i_j|^2 + b_u^2 + b_i^2 + b_j^2)
/// with the forward rule taken from config.representation. In binary mode the
/// sign is differentiated with ste_grad and the scales with sign(w) / n.
TripletGradients grad_triplet(const DenseModel& model, const TrainConfig& config, Index u, Index i, Index j);

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::chrono::duration<double> duration{};
    std::size_t triplets = 0;
    std::size_t skipped = 0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

struct FitResult {
    DenseModel model;
    TrainReport report;
};

using ProgressSink = std::function<void(const EpochStats&)>;

/// Trains a model on `train`. Embeddings start at Normal(0, 1/n), biases at
/// zero. Deterministic for a fixed config.
FitResult fit(const InteractionSet& train, const PositiveSets& positives, const TrainConfig& config,
              const ProgressSink& progress = {});

inline constexpr std::size_t kMaxRejections = 100;

template <typename Scorer>
std::optional<Index> sample_negative(Index u, const PositiveSets& positives, Scorer&& score, float r_ui, Loss loss,
                                     std::size_t max_sampled, Rng& rng) {
    const std::size_t num_items = positives.num_items();
    if (num_items == 0 || positives.count(u) >= num_items) return std::nullopt;
    std::uniform_int_distribution<Index> uniform(0, static_cast<Index>(num_items - 1));

    auto draw = [&]() -> std::optional<Index> {
        for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
            const Index j = uniform(rng);
            if (!positives.contains(u, j)) return j;
        }
        return std::nullopt;
    };

    const std::size_t attempts = loss == Loss::bpr ? 1 : std::max<std::size_t>(max_sampled, 1);
    std::optional<Index> last;
    for (std::size_t k = 0; k < attempts; ++k) {
        last = draw();
        if (!last) return std::nullopt;
        if (loss == Loss::bpr || hinge_loss(r_ui, score(*last)) > 0.0f) return last;
    }
    return last;
}

}  // namespace blr
