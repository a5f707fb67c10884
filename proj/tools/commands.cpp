#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "blr/error.hpp"
#include "blr/evalbench.hpp"
#include "cli.hpp"

namespace blr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 42;
    std::string format = "table";
    std::string out;
    CLI::Option* seed_opt = nullptr;
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot write '" + path + "'");
    out << text;
    out.flush();
    if (!out) throw FormatError(FormatErrorKind::io, "write failed for '" + path + "'");
}

/// Sends a rendered report to --out when given, else to stdout.
void emit(const Globals& g, std::ostream& out, const std::string& text) {
    if (g.out.empty()) {
        out << text;
    } else {
        write_text_file(g.out, text);
    }
}

/// Checks a dataset file against the fingerprint recorded by `split`.
void verify_manifest(const std::string& manifest_path, const std::string& data_path, const InteractionSet& data) {
    if (manifest_path.empty()) return;
    const auto manifest = read_json_file(manifest_path);
    const std::string name = fs::path(data_path).filename().string();
    try {
        for (const auto& [part, entry] : manifest.at("files").items()) {
            if (entry.at("path").get<std::string>() != name) continue;
            const auto expected = entry.at("fingerprint").get<std::string>();
            const auto actual = fingerprint(data);
            if (expected != actual) {
                throw DataError("'" + data_path + "' does not match its manifest (fingerprint " + actual +
                                ", expected " + expected + ")");
            }
            return;
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest '" + manifest_path + "': " + e.what());
    }
    throw DataError("'" + name + "' is not listed in manifest '" + manifest_path + "'");
}

InteractionSet load_checked(const std::string& path, const std::string& manifest) {
    auto data = read_interactions_file(path);
    verify_manifest(manifest, path, data);
    return data;
}

std::string fixed(double x, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << x;
    return os.str();
}

// ---------------------------------------------------------------- split

struct SplitArgs {
    std::string input;
    std::string input_format;
    double train = 0.8, test = 0.1, validation = 0.1;
    std::optional<double> min_rating;
};

int cmd_split(const SplitArgs& a, const Globals& g, std::ostream& out) {
    if (g.out.empty()) throw InvalidArgument("split needs --out DIR");
    SplitSpec spec{a.train, a.test, a.validation, g.seed};
    spec.validate();

    ParseOptions opts;
    if (a.input_format.empty()) {
        opts.format = fs::path(a.input).extension() == ".csv" ? RatingsFormat::csv : RatingsFormat::dat;
    } else {
        opts.format = a.input_format == "csv" ? RatingsFormat::csv : RatingsFormat::dat;
    }
    opts.min_rating = a.min_rating;

    std::ifstream in(a.input);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open '" + a.input + "'");
    const auto all = parse_movielens(in, opts);
    const auto parts = split(all, spec);

    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec) throw FormatError(FormatErrorKind::io, "cannot create '" + g.out + "': " + ec.message());

    json files = json::object();
    const std::vector<std::pair<std::string, const InteractionSet*>> named{
        {"train", &parts.train}, {"test", &parts.test}, {"validation", &parts.validation}};
    for (const auto& [name, set] : named) {
        const std::string file = name + ".blri";
        write_interactions_file(*set, (fs::path(g.out) / file).string());
        files[name] = {{"path", file}, {"pairs", set->size()}, {"fingerprint", fingerprint(*set)}};
    }
    json manifest{{"command", "split"},
                  {"input", a.input},
                  {"input_fingerprint", fingerprint(all)},
                  {"seed", g.seed},
                  {"fractions", {{"train", a.train}, {"test", a.test}, {"validation", a.validation}}},
                  {"num_users", all.num_users()},
                  {"num_items", all.num_items()},
                  {"num_pairs", all.size()},
                  {"files", files}};
    write_text_file((fs::path(g.out) / "manifest.json").string(), manifest.dump(2) + "\n");

    if (g.format == "jsonl") {
        out << manifest.dump() << '\n';
    } else {
        out << all.size() << " interactions, " << all.num_users() << " users, " << all.num_items() << " items\n";
        for (const auto& [name, set] : named) {
            out << std::left << std::setw(11) << name << std::right << std::setw(10) << set->size() << "  "
                << files[name]["fingerprint"].get<std::string>() << '\n';
        }
    }
    return ok;
}

// ---------------------------------------------------------------- fit

struct ConfigFlags {
    CLI::Option* dim = nullptr;
    CLI::Option* representation = nullptr;
    CLI::Option* loss = nullptr;
    CLI::Option* bpr_form = nullptr;
    CLI::Option* scale_gradient = nullptr;
    CLI::Option* lr = nullptr;
    CLI::Option* l2 = nullptr;
    CLI::Option* batch = nullptr;
    CLI::Option* epochs = nullptr;
    CLI::Option* max_sampled = nullptr;

    std::size_t dim_v = 32;
    std::string representation_v = "dense";
    std::string loss_v = "bpr";
    std::string bpr_form_v = "one_minus_sigmoid";
    std::string scale_gradient_v = "through_scales";
    double lr_v = 0.01;
    double l2_v = 0.0;
    std::size_t batch_v = 256;
    std::size_t epochs_v = 10;
    std::size_t max_sampled_v = 5;

    void add_model_flags(CLI::App* app) {
        dim = app->add_option("--dim", dim_v, "Embedding dimension, a positive multiple of 32")->default_val(32);
        representation = app->add_option("--representation", representation_v, "dense or binary")
                             ->check(CLI::IsMember({"dense", "binary"}))
                             ->default_val("dense");
        bpr_form = app->add_option("--bpr-form", bpr_form_v, "one_minus_sigmoid or neg_log_sigmoid")
                       ->check(CLI::IsMember({"one_minus_sigmoid", "neg_log_sigmoid"}))
                       ->default_val("one_minus_sigmoid");
        scale_gradient = app->add_option("--scale-gradient", scale_gradient_v, "through_scales or detached")
                             ->check(CLI::IsMember({"through_scales", "detached"}))
                             ->default_val("through_scales");
        max_sampled = app->add_option("--max-sampled", max_sampled_v, "Negative draws per positive (adaptive_hinge)")
                          ->default_val(5);
    }

    void add_search_flags(CLI::App* app) {
        loss = app->add_option("--loss", loss_v, "bpr or adaptive_hinge")->default_val("bpr");
        lr = app->add_option("--lr", lr_v, "Adam learning rate")->default_val(0.01);
        l2 = app->add_option("--l2", l2_v, "L2 penalty")->default_val(0.0);
        batch = app->add_option("--batch", batch_v, "Minibatch size")->default_val(256);
        epochs = app->add_option("--epochs", epochs_v, "Training epochs")->default_val(10);
    }

    /// Applies the flags that were given explicitly on top of `c`.
    TrainConfig apply(TrainConfig c) const {
        auto given = [](CLI::Option* o) { return o != nullptr && o->count() > 0; };
        if (given(dim)) c.dim = dim_v;
        if (given(representation)) c.representation = parse_representation(representation_v);
        if (given(loss)) c.loss = parse_loss(loss_v);
        if (given(bpr_form)) c.bpr_form = bpr_form_v == "neg_log_sigmoid" ? BprForm::neg_log_sigmoid
                                                                             : BprForm::one_minus_sigmoid;
        if (given(scale_gradient)) c.scale_gradient = scale_gradient_v == "detached" ? ScaleGradient::detached
                                                                                       : ScaleGradient::through_scales;
        if (given(lr)) c.learning_rate = lr_v;
        if (given(l2)) c.l2 = l2_v;
        if (given(batch)) c.minibatch_size = batch_v;
        if (given(epochs)) c.epochs = epochs_v;
        if (given(max_sampled)) c.max_sampled = max_sampled_v;
        return c;
    }
};

struct FitArgs {
    std::string train;
    std::string config_path;
    std::string manifest;
    bool quiet = false;
    ConfigFlags flags;
};

TrainConfig load_config_file(const std::string& path) {
    const auto j = read_json_file(path);
    // Accept a bare config, a search winner or a run manifest.
    return config_from_json(j.contains("config") ? j.at("config") : j);
}

int cmd_fit(const FitArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    if (g.out.empty()) throw InvalidArgument("fit needs --out MODEL");
    TrainConfig config = a.config_path.empty() ? TrainConfig{} : load_config_file(a.config_path);
    config = a.flags.apply(config);
    if (g.seed_opt->count() > 0) config.seed = g.seed;
    config.validate();

    const auto train = load_checked(a.train, a.manifest);
    ProgressSink progress;
    if (!a.quiet) {
        progress = [&](const EpochStats& s) {
            err << "epoch " << s.epoch + 1 << "/" << config.epochs << "  loss " << fixed(s.mean_loss, 6) << "  "
                << fixed(s.duration.count(), 2) << "s\n";
        };
    }
    const auto result = fit(train, PositiveSets(train), config, progress);
    save_model_file(result.model, g.out);

    json losses = json::array();
    for (const auto& e : result.report.epochs) losses.push_back(e.mean_loss);
    json manifest{{"command", "fit"},
                  {"config", config_to_json(config)},
                  {"dataset", {{"path", a.train}, {"fingerprint", fingerprint(train)}}},
                  {"seed", config.seed},
                  {"artifacts", {{"model", g.out}}},
                  {"metrics", {{"epoch_loss", losses}}}};
    write_text_file(g.out + ".json", manifest.dump(2) + "\n");

    if (g.format == "jsonl") {
        out << manifest.dump() << '\n';
    } else {
        out << "wrote " << g.out << "  (" << to_string(config.representation) << ", dim " << config.dim << ", "
            << config.epochs << " epochs, final loss " << fixed(losses.back().get<double>(), 6) << ")\n";
    }
    return ok;
}

// ---------------------------------------------------------------- search

struct SearchArgs {
    std::string train, test;
    std::string manifest, model_out, config_out;
    std::size_t jobs = 1;
    std::vector<std::string> losses{"bpr", "adaptive_hinge"};
    SearchSpace space;
    ConfigFlags flags;
};

std::string trial_row(const Trial& t, bool best) {
    std::ostringstream os;
    os << (best ? "*" : " ") << std::setw(5) << t.index << std::setw(16) << to_string(t.config.loss)
       << std::setw(12) << std::scientific << std::setprecision(3) << t.config.learning_rate << std::setw(12)
       << t.config.l2 << std::defaultfloat << std::setw(7) << t.config.minibatch_size << std::setw(7)
       << t.config.epochs << std::setw(9);
    if (t.mrr) {
        os << fixed(*t.mrr, 4);
    } else {
        os << "failed" << "  " << t.error;
    }
    return os.str();
}

int cmd_search(SearchArgs a, const Globals& g, std::ostream& out, std::ostream& err) {
    a.space.seed = g.seed;
    a.space.losses.clear();
    for (const auto& l : a.losses) a.space.losses.push_back(parse_loss(l));
    a.space.validate();
    const TrainConfig base = a.flags.apply(TrainConfig{});
    base.validate();

    const auto train = load_checked(a.train, a.manifest);
    const auto test = load_checked(a.test, a.manifest);

    std::ofstream log;
    if (!g.out.empty()) {
        log.open(g.out, std::ios::trunc);
        if (!log) throw FormatError(FormatErrorKind::io, "cannot write '" + g.out + "'");
    }
    auto sink = [&](const Trial& t) {
        if (log.is_open()) log << trial_to_line(t) << '\n' << std::flush;
        err << "trial " << t.index + 1 << "/" << a.space.budget << ": "
            << (t.mrr ? "mrr " + fixed(*t.mrr, 4) : "failed (" + t.error + ")") << '\n';
    };
    auto result = random_search(train, test, a.space, base, a.jobs, sink);
    const Trial& best = result.trials[result.best];

    json winner{{"best", best.index}, {"mrr", *best.mrr}, {"config", config_to_json(best.config)}};
    if (!a.config_out.empty()) write_text_file(a.config_out, winner.dump(2) + "\n");
    if (!a.model_out.empty()) {
        save_model_file(*result.best_model, a.model_out);
        json manifest{{"command", "search"},
                      {"config", config_to_json(best.config)},
                      {"dataset",
                       {{"train", {{"path", a.train}, {"fingerprint", fingerprint(train)}}},
                        {"test", {{"path", a.test}, {"fingerprint", fingerprint(test)}}}}},
                      {"seed", g.seed},
                      {"artifacts", {{"model", a.model_out}, {"trials", g.out}}},
                      {"metrics", {{"test_mrr", *best.mrr}, {"trials", result.trials.size()}}}};
        write_text_file(a.model_out + ".json", manifest.dump(2) + "\n");
    }

    if (g.format == "jsonl") {
        for (const auto& t : result.trials) out << trial_to_line(t) << '\n';
        out << winner.dump() << '\n';
    } else {
        out << " trial            loss          lr          l2  batch epochs      mrr\n";
        for (const auto& t : result.trials) out << trial_row(t, t.index == best.index) << '\n';
        out << "best: trial " << best.index << ", test mrr " << fixed(*best.mrr, 4) << '\n';
    }
    return ok;
}

// ---------------------------------------------------------------- binarize

int cmd_binarize(const std::string& model_path, const Globals& g, std::ostream& out) {
    if (g.out.empty()) throw InvalidArgument("binarize needs --out MODEL");
    const auto model = load_model_file(model_path);
    const auto* dense = std::get_if<DenseModel>(&model);
    if (dense == nullptr) {
        throw FormatError(FormatErrorKind::wrong_kind, "'" + model_path + "' is already a packed model");
    }
    const auto packed = binarize(*dense);
    save_model_file(packed, g.out);
    const auto footprint = memory_footprint(packed.dim());
    if (g.format == "jsonl") {
        out << json{{"command", "binarize"},
                    {"input", model_path},
                    {"output", g.out},
                    {"dim", packed.dim()},
                    {"memory_ratio", footprint.ratio}}
                   .dump()
            << '\n';
    } else {
        out << "wrote " << g.out << "  (dim " << packed.dim() << ", " << footprint.binary_bytes << " vs "
            << footprint.dense_bytes << " bytes per entity)\n";
    }
    return ok;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model, eval, train, manifest, label;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
    const auto model = load_model_file(a.model);
    const auto eval = load_checked(a.eval, a.manifest);
    const auto train = load_checked(a.train, a.manifest);
    const auto report = mrr(model, eval, PositiveSets(train));

    ReportRow row;
    std::visit([&](const auto& m) { row.dim = m.dim(); }, model);
    row.label = a.label;
    if (row.label.empty()) {
        const auto* dense = std::get_if<DenseModel>(&model);
        row.label = dense != nullptr && dense->mode() == Representation::dense ? "dense" : "binary";
    }
    row.mrr = report.mrr;

    if (g.format == "jsonl") {
        emit(g, out, to_line(row) + "\n");
    } else {
        const std::vector<ReportRow> rows{row};
        emit(g, out,
             render_table(rows) + std::to_string(report.num_evaluated) + " interactions ranked, " +
                 report.excluded_policy + "\n");
    }
    return ok;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkArgs {
    std::vector<std::size_t> dims{32, 64, 128, 256, 512, 1024};
    std::size_t items = 100'000;
    std::size_t reps = 500;
    std::vector<std::string> include;
};

std::vector<ReportRow> read_report_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open '" + path + "'");
    std::vector<ReportRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(parse_line(line));
    }
    return rows;
}

int cmd_benchmark(const BenchmarkArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    if (a.items == 0) throw InvalidArgument("--items must be at least 1");
    if (a.reps == 0) throw InvalidArgument("--reps must be at least 1");
    if (a.dims.empty()) throw InvalidArgument("--dims must list at least one dimension");
    for (auto d : a.dims) check_dim(d);

    std::vector<ReportRow> rows;
    for (const auto& path : a.include) {
        auto extra = read_report_lines(path);
        rows.insert(rows.end(), extra.begin(), extra.end());
    }
    for (auto dim : a.dims) {
        err << "benchmarking dim " << dim << " (" << a.reps << " x " << a.items << " items)\n";
        rows.push_back(to_row(run_benchmark(BenchConfig{dim, a.items, a.reps, g.seed})));
    }

    if (g.format == "jsonl") {
        std::string text;
        for (const auto& r : rows) text += to_line(r) + "\n";
        emit(g, out, text);
    } else {
        emit(g, out, render_table(rows));
    }
    return ok;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dense and binarized learning-to-rank factorization models", "blr"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "blr 0.1.0");

    Globals g;
    g.seed_opt = app.add_option("--seed", g.seed, "Seed for every random choice")->default_val(42);
    app.add_option("--format", g.format, "Report format, table or jsonl")
        ->check(CLI::IsMember({"table", "jsonl"}))
        ->default_val("table");
    app.add_option("--out", g.out, "Output path; its meaning depends on the command");

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand("split", "Parse a ratings file and split it into train/test/validation");
    split_cmd->add_option("input", split_args.input, "ratings.dat or ratings.csv")->required();
    split_cmd->add_option("--input-format", split_args.input_format, "dat or csv (default: from the extension)")
        ->check(CLI::IsMember({"dat", "csv"}));
    split_cmd->add_option("--train-fraction", split_args.train)->default_val(0.8);
    split_cmd->add_option("--test-fraction", split_args.test)->default_val(0.1);
    split_cmd->add_option("--validation-fraction", split_args.validation)->default_val(0.1);
    split_cmd->add_option("--min-rating", split_args.min_rating, "Drop ratings below this value");
    split_cmd->footer("--out DIR receives train.blri, test.blri, validation.blri and manifest.json.");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Train a model on an interaction file");
    fit_cmd->add_option("train", fit_args.train, "Training interactions (.blri)")->required();
    fit_cmd->add_option("--config", fit_args.config_path, "JSON config; explicit flags override it");
    fit_cmd->add_option("--manifest", fit_args.manifest, "Verify the input against a split manifest");
    fit_cmd->add_flag("--quiet,-q", fit_args.quiet, "No per-epoch progress");
    fit_args.flags.add_model_flags(fit_cmd);
    fit_args.flags.add_search_flags(fit_cmd);
    fit_cmd->footer("--out MODEL receives the model; MODEL.json records the run.");

    SearchArgs search_args;
    auto* search_cmd = app.add_subcommand("search", "Random hyperparameter search scored by test MRR");
    search_cmd->add_option("train", search_args.train)->required();
    search_cmd->add_option("test", search_args.test)->required();
    search_cmd->add_option("--budget", search_args.space.budget, "Number of trials")->default_val(30);
    search_cmd->add_option("--jobs", search_args.jobs, "Trials run concurrently")->default_val(1);
    search_cmd->add_option("--lr-min", search_args.space.lr_min)->default_val(1e-4);
    search_cmd->add_option("--lr-max", search_args.space.lr_max)->default_val(1e-1);
    search_cmd->add_option("--l2-min", search_args.space.l2_min)->default_val(1e-9);
    search_cmd->add_option("--l2-max", search_args.space.l2_max)->default_val(1e-3);
    search_cmd->add_option("--batches", search_args.space.minibatch_sizes, "Minibatch sizes to choose from")
        ->delimiter(',')
        ->default_str("128,256,512,1024,2048");
    search_cmd->add_option("--epoch-choices", search_args.space.epochs, "Epoch counts to choose from")
        ->delimiter(',')
        ->default_str("5,10,20,30,50");
    search_cmd->add_option("--losses", search_args.losses, "Losses to choose from")
        ->delimiter(',')
        ->check(CLI::IsMember({"bpr", "adaptive_hinge"}))
        ->default_str("bpr,adaptive_hinge");
    search_cmd->add_option("--manifest", search_args.manifest, "Verify inputs against a split manifest");
    search_cmd->add_option("--model-out", search_args.model_out, "Save the winning model");
    search_cmd->add_option("--config-out", search_args.config_out, "Save the winning config as JSON");
    search_args.flags.add_model_flags(search_cmd);
    search_cmd->footer(
        "Learning rate and l2 are log-uniform, the rest uniform over the listed choices.\n"
        "The default ranges are broad guesses; none of them was tuned.\n"
        "--out LOG receives one JSON line per trial.");

    std::string binarize_input;
    auto* binarize_cmd = app.add_subcommand("binarize", "Pack a dense model into 1-bit weights");
    binarize_cmd->add_option("model", binarize_input)->required();

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "MRR of a model on held-out interactions");
    eval_cmd->add_option("model", eval_args.model)->required();
    eval_cmd->add_option("eval", eval_args.eval, "Interactions to rank (.blri)")->required();
    eval_cmd->add_option("--train", eval_args.train, "Training interactions, excluded from the ranking")->required();
    eval_cmd->add_option("--manifest", eval_args.manifest, "Verify inputs against a split manifest");
    eval_cmd->add_option("--label", eval_args.label, "Row label (default: dense or binary from the model)");

    BenchmarkArgs bench_args;
    auto* bench_cmd = app.add_subcommand("benchmark", "Scoring throughput and memory per dimension");
    bench_cmd->add_option("--dims", bench_args.dims)->delimiter(',')->default_str("32,64,128,256,512,1024");
    bench_cmd->add_option("--items", bench_args.items, "Items scored per repetition")->default_val(100000);
    bench_cmd->add_option("--reps", bench_args.reps, "Timed repetitions")->default_val(500);
    bench_cmd->add_option("--include", bench_args.include, "Report lines (jsonl) merged into the table");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage_error;
    }

    if (*split_cmd) return cmd_split(split_args, g, out);
    if (*fit_cmd) return cmd_fit(fit_args, g, out, err);
    if (*search_cmd) return cmd_search(search_args, g, out, err);
    if (*binarize_cmd) return cmd_binarize(binarize_input, g, out);
    if (*eval_cmd) return cmd_evaluate(eval_args, g, out);
    if (*bench_cmd) return cmd_benchmark(bench_args, g, out, err);
    return usage_error;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(argc, argv, out, err);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return data_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return runtime_failure;
    }
}

}  // namespace blr::cli
