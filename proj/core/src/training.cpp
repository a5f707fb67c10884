#include "blr/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blr/error.hpp"
#include "blr/kernels.hpp"
#include "detail.hpp"

namespace blr {

namespace {

float abs_subgradient(float w) { return w > 0.0f ? 1.0f : (w < 0.0f ? -1.0f : 0.0f); }

/// dL/dx for x = r_ui - r_uj, together with the loss value.
std::pair<float, float> loss_and_slope(const TrainConfig& config, float r_ui, float r_uj) {
    const float x = r_ui - r_uj;
    switch (config.loss) {
        case Loss::bpr:
            if (config.bpr_form == BprForm::one_minus_sigmoid) {
                const float s = sigmoid(x);
                return {1.0f - s, -s * (1.0f - s)};
            } else {
                return {bpr_log_loss(r_ui, r_uj), -sigmoid(-x)};
            }
        case Loss::adaptive_hinge: {
            const float loss = hinge_loss(r_ui, r_uj);
            return {loss, loss > 0.0f ? -1.0f : 0.0f};
        }
    }
    return {0.0f, 0.0f};
}

/// Partial derivatives of the binary score beta*alpha*D + b_u + b_i with
/// respect to one user and one item row.
struct BinaryPartials {
    float user_scale;
    float item_scale;
    float sign_dot;
};

BinaryPartials binary_partials(std::span<const float> user, std::span<const float> user_signs,
                               std::span<const float> item) {
    return {scale_factor(user), scale_factor(item), detail::sign_dot(user_signs, item)};
}

// Accumulates d score / d user into du (scaled by weight) and d score / d item
// into di (scaled by weight).
void binary_backward(std::span<const float> user, std::span<const float> item, const BinaryPartials& p,
                     ScaleGradient scale_gradient, float weight, std::span<float> du, std::span<float> di) {
    const float n = static_cast<float>(user.size());
    const bool through = scale_gradient == ScaleGradient::through_scales;
    const float ab = p.user_scale * p.item_scale;
    for (std::size_t e = 0; e < user.size(); ++e) {
        const float su = detail::sign_of(user[e]);
        const float si = detail::sign_of(item[e]);
        float gu = ab * si * ste_grad(user[e]);
        float gi = ab * su * ste_grad(item[e]);
        if (through) {
            gu += p.item_scale * p.sign_dot * abs_subgradient(user[e]) / n;
            gi += p.user_scale * p.sign_dot * abs_subgradient(item[e]) / n;
        }
        du[e] += weight * gu;
        if (!di.empty()) di[e] += weight * gi;
    }
}

void triplet_backward(const DenseModel& model, const TrainConfig& config, Index u, Index i, Index j,
                      TripletGradients& out) {
    const std::size_t n = model.dim();
    const auto user = model.user_factors(u);
    const auto pos = model.item_factors(i);
    const auto neg = model.item_factors(j);
    out.user.assign(n, 0.0f);
    out.positive.assign(n, 0.0f);
    out.negative.assign(n, 0.0f);

    float r_ui = 0.0f;
    float r_uj = 0.0f;
    std::vector<float> user_signs;
    BinaryPartials p_ui{};
    BinaryPartials p_uj{};
    if (config.representation == Representation::binary) {
        user_signs = sign_vec(user);
        p_ui = binary_partials(user, user_signs, pos);
        p_uj = binary_partials(user, user_signs, neg);
        r_ui = combine_binary(p_ui.user_scale, p_ui.item_scale, p_ui.sign_dot, model.user_bias()[u],
                              model.item_bias()[i]);
        r_uj = combine_binary(p_uj.user_scale, p_uj.item_scale, p_uj.sign_dot, model.user_bias()[u],
                              model.item_bias()[j]);
    } else {
        r_ui = predict_dense(model, u, i);
        r_uj = predict_dense(model, u, j);
    }

    const auto [loss, slope] = loss_and_slope(config, r_ui, r_uj);
    out.loss = loss;
    out.user_bias = 0.0f;
    out.positive_bias = slope;
    out.negative_bias = -slope;

    if (slope != 0.0f) {
        if (config.representation == Representation::binary) {
            binary_backward(user, pos, p_ui, config.scale_gradient, slope, out.user, out.positive);
            binary_backward(user, neg, p_uj, config.scale_gradient, -slope, out.user, out.negative);
        } else {
            for (std::size_t e = 0; e < n; ++e) {
                out.user[e] = slope * (pos[e] - neg[e]);
                out.positive[e] = slope * user[e];
                out.negative[e] = -slope * user[e];
            }
        }
    }

    if (config.l2 > 0.0) {
        const auto l2 = static_cast<float>(config.l2);
        for (std::size_t e = 0; e < n; ++e) {
            out.user[e] += l2 * user[e];
            out.positive[e] += l2 * pos[e];
            out.negative[e] += l2 * neg[e];
        }
        out.user_bias += l2 * model.user_bias()[u];
        out.positive_bias += l2 * model.item_bias()[i];
        out.negative_bias += l2 * model.item_bias()[j];
    }
}

/// Minibatch gradient storage for the rows touched in the batch.
class RowAccumulator {
public:
    RowAccumulator(std::size_t num_rows, std::size_t row_len) : row_len_(row_len), slot_of_(num_rows, -1) {}

    void add(Index r, std::span<const float> grad, float bias_grad) {
        auto& slot = slot_of_[r];
        if (slot < 0) {
            slot = static_cast<std::int64_t>(rows_.size());
            rows_.push_back(r);
            grads_.resize(grads_.size() + row_len_, 0.0f);
            bias_.push_back(0.0f);
        }
        float* dst = grads_.data() + static_cast<std::size_t>(slot) * row_len_;
        for (std::size_t e = 0; e < row_len_; ++e) dst[e] += grad[e];
        bias_[static_cast<std::size_t>(slot)] += bias_grad;
    }

    /// Scales loss gradients by `weight` and adds the L2 term of each row.
    void finalize(float weight, float l2, std::span<const float> factors, std::span<const float> biases) {
        for (std::size_t s = 0; s < rows_.size(); ++s) {
            const std::size_t base = static_cast<std::size_t>(rows_[s]) * row_len_;
            float* g = grads_.data() + s * row_len_;
            for (std::size_t e = 0; e < row_len_; ++e) g[e] = weight * g[e] + l2 * factors[base + e];
            bias_[s] = weight * bias_[s] + l2 * biases[rows_[s]];
        }
    }

    void clear() {
        for (Index r : rows_) slot_of_[r] = -1;
        rows_.clear();
        grads_.clear();
        bias_.clear();
    }

    bool empty() const { return rows_.empty(); }
    std::span<const Index> rows() const { return rows_; }
    std::span<const float> grads() const { return grads_; }
    std::span<const float> bias() const { return bias_; }

private:
    std::size_t row_len_;
    std::vector<std::int64_t> slot_of_;
    std::vector<Index> rows_;
    std::vector<float> grads_;
    std::vector<float> bias_;
};

void check_finite(std::span<const float> grads) {
    for (float g : grads) {
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient encountered");
    }
}

void adam_update(float& param, float& m, float& v, float g, const AdamState& state, double step_size,
                 double v_correction) {
    m = static_cast<float>(state.beta1 * m + (1.0 - state.beta1) * g);
    v = static_cast<float>(state.beta2 * v + (1.0 - state.beta2) * static_cast<double>(g) * g);
    const double denom = std::sqrt(static_cast<double>(v)) / v_correction + state.eps;
    param = static_cast<float>(param - step_size * m / denom);
}

}  // namespace

std::string to_string(Loss loss) { return loss == Loss::bpr ? "bpr" : "adaptive_hinge"; }

Loss parse_loss(const std::string& s) {
    if (s == "bpr") return Loss::bpr;
    if (s == "adaptive_hinge" || s == "hinge" || s == "warp") return Loss::adaptive_hinge;
    throw InvalidArgument("unknown loss '" + s + "'");
}

void TrainConfig::validate() const {
    check_dim(dim);
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("learning rate must be positive");
    }
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InvalidArgument("l2 penalty must be non-negative");
    if (minibatch_size == 0) throw InvalidArgument("minibatch size must be positive");
    if (epochs == 0) throw InvalidArgument("epoch count must be positive");
    if (max_sampled == 0) throw InvalidArgument("max_sampled must be at least 1");
}

float sigmoid(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

float bpr_loss(float r_ui, float r_uj) { return 1.0f - sigmoid(r_ui - r_uj); }

float bpr_log_loss(float r_ui, float r_uj) {
    // -log sigmoid(x) = log(1 + exp(-x)), evaluated without overflow.
    const float x = r_ui - r_uj;
    return x >= 0.0f ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

float hinge_loss(float r_ui, float r_uj) { return std::max(0.0f, 1.0f - r_ui + r_uj); }

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw InvalidArgument("adam_step: parameter, gradient and state sizes differ");
    }
    check_finite(grads);
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double step_size = lr / (1.0 - std::pow(state.beta1, t));
    const double v_correction = std::sqrt(1.0 - std::pow(state.beta2, t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        adam_update(params[k], state.m[k], state.v[k], grads[k], state, step_size, v_correction);
    }
}

void adam_step_rows(std::span<float> params, std::span<const float> grads, std::span<const Index> rows,
                    std::size_t row_len, AdamState& state, double lr) {
    if (grads.size() != rows.size() * row_len || state.m.size() != params.size() ||
        state.v.size() != params.size()) {
        throw InvalidArgument("adam_step_rows: gradient or state sizes inconsistent");
    }
    check_finite(grads);
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double step_size = lr / (1.0 - std::pow(state.beta1, t));
    const double v_correction = std::sqrt(1.0 - std::pow(state.beta2, t));
    for (std::size_t s = 0; s < rows.size(); ++s) {
        const std::size_t base = static_cast<std::size_t>(rows[s]) * row_len;
        if (base + row_len > params.size()) throw InvalidArgument("adam_step_rows: row out of range");
        for (std::size_t e = 0; e < row_len; ++e) {
            adam_update(params[base + e], state.m[base + e], state.v[base + e], grads[s * row_len + e], state,
                        step_size, v_correction);
        }
    }
}

TripletGradients grad_triplet(const DenseModel& model, const TrainConfig& config, Index u, Index i, Index j) {
    if (model.mode() != config.representation) {
        throw InvalidArgument("model mode does not match the configured representation");
    }
    TripletGradients out;
    triplet_backward(model, config, u, i, j, out);
    return out;
}

FitResult fit(const InteractionSet& train, const PositiveSets& positives, const TrainConfig& config,
              const ProgressSink& progress) {
    config.validate();
    if (train.empty()) throw DataError("training set is empty");
    if (positives.num_users() != train.num_users() || positives.num_items() != train.num_items()) {
        throw InvalidArgument("positive sets and training set have different id spaces");
    }

    const std::size_t n = config.dim;
    DenseModel model(n, train.num_users(), train.num_items(), config.representation);
    Rng rng(config.seed);
    {
        std::normal_distribution<float> init(0.0f, static_cast<float>(1.0 / std::sqrt(static_cast<double>(n))));
        for (auto& w : model.all_user_factors()) w = init(rng);
        for (auto& w : model.all_item_factors()) w = init(rng);
    }

    AdamState user_state(model.all_user_factors().size());
    AdamState item_state(model.all_item_factors().size());
    AdamState user_bias_state(model.num_users());
    AdamState item_bias_state(model.num_items());

    RowAccumulator user_acc(model.num_users(), n);
    RowAccumulator item_acc(model.num_items(), n);

    TrainConfig backward_config = config;
    backward_config.l2 = 0.0;  // L2 is added once per touched row per batch
    const bool binary = config.representation == Representation::binary;

    const auto users = train.user_ids();
    const auto items = train.item_ids();
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    FitResult result;
    TripletGradients grads;
    std::vector<float> user_signs;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        EpochStats stats;
        stats.epoch = epoch;

        for (std::size_t begin = 0; begin < order.size(); begin += config.minibatch_size) {
            const std::size_t end = std::min(order.size(), begin + config.minibatch_size);
            std::size_t batch_triplets = 0;

            for (std::size_t k = begin; k < end; ++k) {
                const Index u = users[order[k]];
                const Index i = items[order[k]];
                std::optional<Index> j;
                if (binary) {
                    const auto user = model.user_factors(u);
                    user_signs = sign_vec(user);
                    const float beta = scale_factor(user);
                    const float bu = model.user_bias()[u];
                    auto score = [&](Index item) {
                        const auto row = model.item_factors(item);
                        return combine_binary(beta, scale_factor(row), detail::sign_dot(user_signs, row), bu,
                                              model.item_bias()[item]);
                    };
                    j = sample_negative(u, positives, score, score(i), config.loss, config.max_sampled, rng);
                } else {
                    auto score = [&](Index item) { return predict_dense(model, u, item); };
                    j = sample_negative(u, positives, score, score(i), config.loss, config.max_sampled, rng);
                }
                if (!j) {
                    ++stats.skipped;
                    continue;
                }

                triplet_backward(model, backward_config, u, i, *j, grads);
                loss_sum += grads.loss;
                ++batch_triplets;
                if (grads.loss == 0.0f && config.loss == Loss::adaptive_hinge) continue;

                user_acc.add(u, grads.user, grads.user_bias);
                item_acc.add(i, grads.positive, grads.positive_bias);
                item_acc.add(*j, grads.negative, grads.negative_bias);
            }

            stats.triplets += batch_triplets;
            if (batch_triplets > 0 && !(user_acc.empty() && item_acc.empty())) {
                const float weight = 1.0f / static_cast<float>(batch_triplets);
                const auto l2 = static_cast<float>(config.l2);
                user_acc.finalize(weight, l2, model.all_user_factors(), model.user_bias());
                item_acc.finalize(weight, l2, model.all_item_factors(), model.item_bias());
                adam_step_rows(model.all_user_factors(), user_acc.grads(), user_acc.rows(), n, user_state,
                               config.learning_rate);
                adam_step_rows(model.user_bias(), user_acc.bias(), user_acc.rows(), 1, user_bias_state,
                               config.learning_rate);
                adam_step_rows(model.all_item_factors(), item_acc.grads(), item_acc.rows(), n, item_state,
                               config.learning_rate);
                adam_step_rows(model.item_bias(), item_acc.bias(), item_acc.rows(), 1, item_bias_state,
                               config.learning_rate);
            }
            user_acc.clear();
            item_acc.clear();
        }

        stats.mean_loss = stats.triplets > 0 ? loss_sum / static_cast<double>(stats.triplets) : 0.0;
        if (!std::isfinite(stats.mean_loss)) {
            throw NumericalError("epoch " + std::to_string(epoch) + " produced a non-finite loss");
        }
        stats.duration = std::chrono::steady_clock::now() - started;
        result.report.epochs.push_back(stats);
        if (progress) progress(stats);
    }

    result.model = std::move(model);
    return result;
}

}  // namespace blr
