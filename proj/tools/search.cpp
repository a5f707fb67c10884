#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "blr/error.hpp"
#include "blr/evalbench.hpp"
#include "cli.hpp"

namespace blr::cli {

using nlohmann::json;

void SearchSpace::validate() const {
    if (!(lr_min > 0.0 && lr_min <= lr_max)) throw InvalidArgument("learning-rate range must satisfy 0 < min <= max");
    if (!(l2_min > 0.0 && l2_min <= l2_max)) throw InvalidArgument("l2 range must satisfy 0 < min <= max");
    if (minibatch_sizes.empty() || epochs.empty() || losses.empty()) {
        throw InvalidArgument("search choices must be non-empty");
    }
    for (auto b : minibatch_sizes) {
        if (b == 0) throw InvalidArgument("minibatch sizes must be positive");
    }
    for (auto e : epochs) {
        if (e == 0) throw InvalidArgument("epoch counts must be positive");
    }
    if (budget == 0) throw InvalidArgument("search budget must be at least 1");
}

namespace {

double log_uniform(double lo, double hi, Rng& rng) {
    if (lo == hi) return lo;
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

template <typename T>
const T& choose(const std::vector<T>& options, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    return options[pick(rng)];
}

}  // namespace

std::vector<TrainConfig> sample_configs(const SearchSpace& space, const TrainConfig& base) {
    space.validate();
    Rng rng(space.seed);
    std::vector<TrainConfig> out;
    out.reserve(space.budget);
    for (std::size_t k = 0; k < space.budget; ++k) {
        TrainConfig c = base;
        c.learning_rate = log_uniform(space.lr_min, space.lr_max, rng);
        c.l2 = log_uniform(space.l2_min, space.l2_max, rng);
        c.minibatch_size = choose(space.minibatch_sizes, rng);
        c.epochs = choose(space.epochs, rng);
        c.loss = choose(space.losses, rng);
        c.seed = rng();
        out.push_back(c);
    }
    return out;
}

std::size_t best_trial(const std::vector<Trial>& trials) {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < trials.size(); ++k) {
        if (!trials[k].mrr) continue;
        if (!best || *trials[k].mrr > *trials[*best].mrr) best = k;
    }
    if (!best) throw NumericalError("every search trial failed");
    return *best;
}

SearchResult random_search(const InteractionSet& train, const InteractionSet& test, const SearchSpace& space,
                           const TrainConfig& base, std::size_t jobs, const TrialSink& sink) {
    base.validate();
    const auto configs = sample_configs(space, base);
    const PositiveSets positives(train);

    SearchResult result;
    result.trials.resize(configs.size());
    std::vector<std::optional<DenseModel>> models(configs.size());
    std::mutex sink_mutex;

    auto run_trial = [&](std::size_t k) {
        Trial& t = result.trials[k];
        t.index = k;
        t.config = configs[k];
        try {
            auto fitted = fit(train, positives, t.config);
            t.mrr = mrr(fitted.model, test, positives).mrr;
            if (!std::isfinite(*t.mrr)) throw NumericalError("non-finite MRR");
            models[k] = std::move(fitted.model);
        } catch (const std::exception& e) {
            t.mrr.reset();
            t.error = e.what();
        }
        if (sink) {
            std::lock_guard lock(sink_mutex);
            sink(t);
        }
    };

    jobs = std::max<std::size_t>(1, std::min(jobs, configs.size()));
    if (jobs == 1) {
        for (std::size_t k = 0; k < configs.size(); ++k) run_trial(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t k = next++; k < configs.size(); k = next++) run_trial(k);
            });
        }
        for (auto& w : workers) w.join();
    }

    result.best = best_trial(result.trials);
    result.best_model = std::move(models[result.best]);
    return result;
}

namespace {

std::string bpr_form_name(BprForm f) { return f == BprForm::one_minus_sigmoid ? "one_minus_sigmoid" : "neg_log_sigmoid"; }

BprForm parse_bpr_form(const std::string& s) {
    if (s == "one_minus_sigmoid") return BprForm::one_minus_sigmoid;
    if (s == "neg_log_sigmoid") return BprForm::neg_log_sigmoid;
    throw InvalidArgument("unknown bpr form '" + s + "'");
}

std::string scale_gradient_name(ScaleGradient g) {
    return g == ScaleGradient::through_scales ? "through_scales" : "detached";
}

ScaleGradient parse_scale_gradient(const std::string& s) {
    if (s == "through_scales") return ScaleGradient::through_scales;
    if (s == "detached") return ScaleGradient::detached;
    throw InvalidArgument("unknown scale gradient '" + s + "'");
}

}  // namespace

json config_to_json(const TrainConfig& c) {
    return json{{"dim", c.dim},
                {"representation", to_string(c.representation)},
                {"loss", to_string(c.loss)},
                {"bpr_form", bpr_form_name(c.bpr_form)},
                {"scale_gradient", scale_gradient_name(c.scale_gradient)},
                {"learning_rate", c.learning_rate},
                {"l2", c.l2},
                {"minibatch_size", c.minibatch_size},
                {"epochs", c.epochs},
                {"max_sampled", c.max_sampled},
                {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
    try {
        if (j.contains("dim")) c.dim = j.at("dim").get<std::size_t>();
        if (j.contains("representation")) c.representation = parse_representation(j.at("representation").get<std::string>());
        if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
        if (j.contains("bpr_form")) c.bpr_form = parse_bpr_form(j.at("bpr_form").get<std::string>());
        if (j.contains("scale_gradient")) c.scale_gradient = parse_scale_gradient(j.at("scale_gradient").get<std::string>());
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("l2")) c.l2 = j.at("l2").get<double>();
        if (j.contains("minibatch_size")) c.minibatch_size = j.at("minibatch_size").get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("max_sampled")) c.max_sampled = j.at("max_sampled").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("bad config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw DataError(std::string("bad config: ") + e.what());
    }
    return c;
}

std::string trial_to_line(const Trial& t) {
    json j{{"trial", t.index}, {"config", config_to_json(t.config)}};
    j["mrr"] = t.mrr ? json(*t.mrr) : json(nullptr);
    if (!t.error.empty()) j["error"] = t.error;
    return j.dump();
}

Trial trial_from_line(const std::string& line) {
    try {
        const auto j = json::parse(line);
        Trial t;
        t.index = j.at("trial").get<std::size_t>();
        t.config = config_from_json(j.at("config"));
        if (!j.at("mrr").is_null()) t.mrr = j.at("mrr").get<double>();
        if (j.contains("error")) t.error = j.at("error").get<std::string>();
        return t;
    } catch (const json::exception& e) {
        throw DataError(std::string("bad trial record: ") + e.what());
    }
}

std::string fingerprint(const InteractionSet& interactions) {
    std::ostringstream buf;
    save_interactions(interactions, buf);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : buf.str()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

InteractionSet read_interactions_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open '" + path + "'");
    return load_interactions(in);
}

void write_interactions_file(const InteractionSet& interactions, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot write '" + path + "'");
    save_interactions(interactions, out);
    out.flush();
    if (!out) throw FormatError(FormatErrorKind::io, "write failed for '" + path + "'");
}

}  // namespace blr::cli
