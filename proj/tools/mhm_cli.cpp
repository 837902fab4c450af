// mhm: fit price-driven mixed hazard models to purchase logs, predict
// return times, and run the evaluation / simulation pipeline.

#include "mhm/errors.hpp"
#include "mhm/eval.hpp"
#include "mhm/infer.hpp"
#include "mhm/ingest.hpp"
#include "mhm/predict.hpp"
#include "mhm/sim.hpp"
#include "mhm/stats.hpp"
#include "mhm/types.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using mhm::EventLog;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kVersion = "1.0.0";

// Exit codes (also shown in --help):
constexpr int kExitUsage = 2;   // bad flags / arguments
constexpr int kExitIo = 3;      // missing or unwritable files
constexpr int kExitSchema = 4;  // malformed input data
constexpr int kExitNumeric = 5; // numeric failure or diverged fit
constexpr int kExitEmpty = 6;   // dataset empty after filtering
constexpr int kExitUnknown = 7; // unknown identifier / cold-start request

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  2  usage error (unknown flag, invalid argument)\n"
    "  3  I/O error (missing or unwritable file)\n"
    "  4  schema error (malformed CSV / JSON input)\n"
    "  5  numeric failure (non-finite likelihood, diverged fit)\n"
    "  6  empty dataset after filtering\n"
    "  7  unknown identifier or cold-start prediction\n";

// ---- manifest --------------------------------------------------------

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Written alongside every output; identical manifests imply identical
// outputs for identical binaries.
void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::string>& inputs, const ordered_json& config,
                    std::uint64_t seed, const std::vector<std::string>& outputs) {
    ordered_json j;
    j["format"] = "mhm-manifest";
    j["version"] = kVersion;
    j["command"] = command;
    ordered_json ins = ordered_json::object();
    for (const std::string& p : inputs) ins[p] = hex64(fnv1a64_file(p));
    j["inputs"] = std::move(ins);
    j["config"] = config;
    j["seed"] = seed;
    j["outputs"] = outputs;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << '\n';
}

// ---- flat key = value config files -----------------------------------

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw mhm::SchemaError("config line " + std::to_string(lineno) +
                                   ": expected key = value");
        }
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

struct FitOptions {
    mhm::ModelSpec spec;
    mhm::FitConfig config;
};

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw mhm::SchemaError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

// Config file keys mirror the FitConfig / ModelSpec field names; flags
// override anything set here.
void apply_config_file(FitOptions& o, const std::string& path) {
    for (const auto& [key, value] : read_config_file(path)) {
        try {
            if (key == "iterations") o.config.iterations = std::stoi(value);
            else if (key == "learning_rate") o.config.learning_rate = std::stod(value);
            else if (key == "mc_samples") o.config.mc_samples = std::stoi(value);
            else if (key == "seed") o.config.seed = std::stoull(value);
            else if (key == "tolerance") o.config.tolerance = std::stod(value);
            else if (key == "trace_every") o.config.trace_every = std::stoi(value);
            else if (key == "kappa_prior_shape") o.config.kappa_prior_shape = std::stod(value);
            else if (key == "kappa_prior_rate") o.config.kappa_prior_rate = std::stod(value);
            else if (key == "w_step_std") o.config.w_step_std = std::stod(value);
            else if (key == "theta_bound") o.config.theta_bound = std::stod(value);
            else if (key == "ab_bound") o.config.ab_bound = std::stod(value);
            else if (key == "sigma_bound") o.config.sigma_bound = std::stod(value);
            else if (key == "sigma_init") o.config.sigma_init = std::stod(value);
            else if (key == "learn_sigma") o.config.learn_sigma = parse_bool(value, key);
            else if (key == "variant") o.spec.variant = mhm::parse_variant(value);
            else if (key == "precursor_cap") o.spec.precursor_cap = std::stoi(value);
            else if (key == "time_bucket_days") o.spec.time_bucket_days = std::stoi(value);
            else if (key == "horizon_days") o.spec.horizon_days = std::stoi(value);
            else throw mhm::SchemaError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw mhm::SchemaError("config key '" + key + "': bad value '" + value + "'");
        } catch (const std::out_of_range&) {
            throw mhm::SchemaError("config key '" + key + "': value out of range");
        }
    }
}

ordered_json fit_options_json(const FitOptions& o) {
    return {{"variant", mhm::variant_name(o.spec.variant)},
            {"precursor_cap", o.spec.precursor_cap},
            {"time_bucket_days", o.spec.time_bucket_days},
            {"horizon_days", o.spec.horizon_days},
            {"iterations", o.config.iterations},
            {"learning_rate", o.config.learning_rate},
            {"mc_samples", o.config.mc_samples},
            {"tolerance", o.config.tolerance},
            {"trace_every", o.config.trace_every},
            {"kappa_prior_shape", o.config.kappa_prior_shape},
            {"kappa_prior_rate", o.config.kappa_prior_rate},
            {"w_step_std", o.config.w_step_std},
            {"theta_bound", o.config.theta_bound},
            {"ab_bound", o.config.ab_bound},
            {"sigma_bound", o.config.sigma_bound},
            {"sigma_init", o.config.sigma_init},
            {"learn_sigma", o.config.learn_sigma}};
}

// Re-index a test log onto a model's identifier maps; events whose raw
// user/item the model never saw are dropped (they cannot be scored).
EventLog remap_to_model(const mhm::FittedModel& model, const mhm::IndexedLog& test,
                        std::size_t* dropped_out) {
    std::map<std::string, int> users, items;
    for (std::size_t i = 0; i < model.user_ids.size(); ++i) {
        users[model.user_ids[i]] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < model.item_ids.size(); ++i) {
        items[model.item_ids[i]] = static_cast<int>(i);
    }
    std::vector<mhm::PurchaseEvent> events;
    std::size_t dropped = 0;
    for (const mhm::PurchaseEvent& e : test.log.events()) {
        const auto u = users.find(test.user_ids.at(static_cast<std::size_t>(e.user)));
        const auto o = items.find(test.item_ids.at(static_cast<std::size_t>(e.item)));
        if (u == users.end() || o == items.end()) {
            ++dropped;
            continue;
        }
        events.push_back({u->second, o->second, e.time, e.price});
    }
    if (dropped_out != nullptr) *dropped_out = dropped;
    return EventLog(std::move(events), std::max(test.log.t_end(), model.train.t_end()),
                    model.train.n_users(), model.train.n_items());
}

std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

// ---- subcommand bodies -----------------------------------------------

struct IngestArgs {
    std::string format = "generic";
    std::string input;
    std::string window_start;
    std::string window_end;
    int min_degree = 10;
    std::string out;
    std::string test_out;
    double split_day = -1.0;
    std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a) {
    mhm::ParseStats stats;
    std::vector<mhm::RawRecord> records = a.format == "online-retail"
                                              ? mhm::parse_online_retail(a.input, &stats)
                                              : mhm::parse_generic_events(a.input, &stats);
    if (records.empty()) throw mhm::EmptyDatasetError("no usable records in " + a.input);
    std::int64_t start = records.front().timestamp, end = records.front().timestamp;
    for (const mhm::RawRecord& r : records) {
        start = std::min(start, r.timestamp);
        end = std::max(end, r.timestamp);
    }
    if (!a.window_start.empty()) start = mhm::parse_datetime(a.window_start);
    if (!a.window_end.empty()) end = mhm::parse_datetime(a.window_end);

    mhm::IndexedLog indexed = mhm::build_event_log(std::move(records), start, end, a.min_degree);
    const mhm::DatasetStats ds = mhm::dataset_stats(indexed.log);

    std::vector<std::string> outputs{a.out};
    if (a.split_day > 0.0) {
        if (a.test_out.empty()) {
            throw CLI::ValidationError("--split-day requires --test-out");
        }
        mhm::SplitLog split = mhm::split_by_time(indexed.log, a.split_day);
        mhm::IndexedLog train{std::move(split.train), indexed.user_ids, indexed.item_ids};
        mhm::IndexedLog test{std::move(split.test), indexed.user_ids, indexed.item_ids};
        mhm::save_event_log(a.out, train);
        mhm::save_event_log(a.test_out, test);
        outputs.push_back(a.test_out);
        std::cout << "train events: " << train.log.size() << ", test events: " << test.log.size()
                  << " (dropped " << split.dropped_unknown << " with unseen user/item)\n";
    } else {
        mhm::save_event_log(a.out, indexed);
    }
    std::cout << "users: " << ds.users << ", items: " << ds.items
              << ", purchases: " << ds.purchases << ", span: " << ds.span_days << " days\n"
              << "skipped: " << stats.skipped_missing_user << " missing-user, "
              << stats.skipped_cancelled << " cancelled, " << stats.skipped_malformed
              << " malformed\n";

    write_manifest(manifest_path_for(a.out), "ingest", {a.input},
                   {{"format", a.format},
                    {"window_start", start},
                    {"window_end", end},
                    {"min_degree", a.min_degree},
                    {"split_day", a.split_day}},
                   a.seed, outputs);
    return 0;
}

struct FitArgs {
    std::string log;
    std::string config_file;
    std::string out;
    FitOptions options;
    std::optional<std::string> variant;
    std::optional<int> iterations;
    std::optional<double> learning_rate;
    std::optional<int> mc_samples;
    std::optional<std::uint64_t> seed;
    std::optional<double> tolerance;
    std::optional<int> precursor_cap;
    std::optional<bool> learn_sigma;
};

int run_fit(const FitArgs& a0) {
    FitArgs a = a0;
    if (!a.config_file.empty()) apply_config_file(a.options, a.config_file);
    if (a.variant) a.options.spec.variant = mhm::parse_variant(*a.variant);
    if (a.iterations) a.options.config.iterations = *a.iterations;
    if (a.learning_rate) a.options.config.learning_rate = *a.learning_rate;
    if (a.mc_samples) a.options.config.mc_samples = *a.mc_samples;
    if (a.seed) a.options.config.seed = *a.seed;
    if (a.tolerance) a.options.config.tolerance = *a.tolerance;
    if (a.precursor_cap) a.options.spec.precursor_cap = *a.precursor_cap;
    if (a.learn_sigma) a.options.config.learn_sigma = *a.learn_sigma;

    mhm::IndexedLog indexed = mhm::load_event_log(a.log);
    if (indexed.log.empty()) throw mhm::EmptyDatasetError("training log is empty: " + a.log);
    const mhm::FitResult result = mhm::fit(a.options.spec, indexed.log, a.options.config);

    mhm::FittedModel model;
    model.spec = a.options.spec;
    model.config = a.options.config;
    model.params = result.params;
    model.q = result.q;
    model.trace = result.trace;
    model.user_ids = std::move(indexed.user_ids);
    model.item_ids = std::move(indexed.item_ids);
    model.train = std::move(indexed.log);
    mhm::save_checkpoint(a.out, model);

    if (!model.trace.empty()) {
        std::cout << "fit " << mhm::variant_name(model.spec.variant) << ": "
                  << model.trace.size() << " trace points, final ELBO "
                  << model.trace.back().second << "\n";
    }
    std::vector<std::string> inputs{a.log};
    if (!a.config_file.empty()) inputs.push_back(a.config_file);
    write_manifest(manifest_path_for(a.out), "fit", inputs, fit_options_json(a.options),
                   a.options.config.seed, {a.out});
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string test;
    std::vector<int> deadlines;
    std::string out;
    bool same_item_only = false;
};

int run_predict(const PredictArgs& a) {
    if (a.deadlines.empty()) throw CLI::ValidationError("--deadlines must not be empty");
    const mhm::FittedModel model = mhm::load_checkpoint(a.model);
    const mhm::IndexedLog raw_test = mhm::load_event_log(a.test);
    std::size_t dropped = 0;
    const EventLog test = remap_to_model(model, raw_test, &dropped);
    mhm::EvalConfig config;
    config.deadlines = a.deadlines;
    config.same_item_only = a.same_item_only;
    mhm::write_predictions_csv(a.out, model, test, config);
    std::cout << "wrote " << a.out << " (" << test.size() << " test events, dropped " << dropped
              << ")\n";
    ordered_json cfg = {{"deadlines", a.deadlines}, {"same_item_only", a.same_item_only}};
    write_manifest(manifest_path_for(a.out), "predict", {a.model, a.test}, cfg, model.config.seed,
                   {a.out});
    return 0;
}

struct EvalArgs {
    std::vector<std::string> models;
    std::string test;
    std::string out_dir;
    std::vector<int> deadlines{30, 45, 60, 75, 90};
    int max_order = 5;
    bool same_item_only = false;
    bool drop_late_truth = false;
};

int run_eval(const EvalArgs& a) {
    if (a.models.empty()) throw CLI::ValidationError("--models must not be empty");
    std::vector<std::unique_ptr<mhm::FittedModel>> storage;
    std::map<std::string, const mhm::FittedModel*> models;
    for (const std::string& path : a.models) {
        storage.push_back(std::make_unique<mhm::FittedModel>(mhm::load_checkpoint(path)));
        std::string name = mhm::variant_name(storage.back()->spec.variant);
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        while (models.count(name) != 0) name += "+"; // duplicate variants
        models[name] = storage.back().get();
    }
    const mhm::IndexedLog raw_test = mhm::load_event_log(a.test);
    std::size_t dropped = 0;
    const EventLog test = remap_to_model(*storage.front(), raw_test, &dropped);

    mhm::EvalConfig config;
    config.deadlines = a.deadlines;
    config.max_order = a.max_order;
    config.same_item_only = a.same_item_only;
    config.cap_truth_at_deadline = !a.drop_late_truth;
    const mhm::EvalReport report = mhm::evaluate(models, test, config);
    mhm::write_report_csvs(report, a.out_dir);

    for (const auto& [name, per_deadline] : report.rmse) {
        std::cout << "rmse " << name << ":";
        for (const int d : a.deadlines) std::cout << " " << per_deadline.at(d);
        std::cout << "  tll " << report.tll.at(name) << "\n";
    }
    std::vector<std::string> inputs = a.models;
    inputs.push_back(a.test);
    ordered_json cfg = {{"deadlines", a.deadlines},
                        {"max_order", a.max_order},
                        {"same_item_only", a.same_item_only},
                        {"cap_truth_at_deadline", config.cap_truth_at_deadline}};
    write_manifest(a.out_dir + "/manifest.json", "eval", inputs, cfg, 0,
                   {a.out_dir + "/rmse.csv", a.out_dir + "/tll.csv",
                    a.out_dir + "/segments_activity.csv", a.out_dir + "/segments_spend.csv",
                    a.out_dir + "/order_rmse.csv"});
    return 0;
}

struct SimulateArgs {
    std::string variant = "mhme";
    int users = 200;
    int items = 50;
    double horizon = 365.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string params_out;
    std::string params_in;
};

int run_simulate(const SimulateArgs& a) {
    mhm::ModelSpec spec;
    spec.variant = mhm::parse_variant(a.variant);
    mhm::ModelParams params;
    if (!a.params_in.empty()) {
        params = mhm::load_params_json(a.params_in, &spec);
    } else {
        params = mhm::draw_recovery_params(spec, a.users, a.items, a.horizon, a.seed);
    }
    const EventLog log = mhm::simulate_events(spec, params, a.users, a.items, a.horizon, a.seed);

    mhm::IndexedLog indexed;
    indexed.log = log;
    for (int u = 0; u < a.users; ++u) indexed.user_ids.push_back("u" + std::to_string(u));
    for (int o = 0; o < a.items; ++o) indexed.item_ids.push_back("i" + std::to_string(o));
    mhm::write_generic_csv(a.out, indexed);
    std::vector<std::string> outputs{a.out};
    if (!a.params_out.empty()) {
        mhm::save_params_json(a.params_out, spec, params);
        outputs.push_back(a.params_out);
    }
    std::cout << "simulated " << log.size() << " events over " << a.horizon << " days\n";
    std::vector<std::string> inputs;
    if (!a.params_in.empty()) inputs.push_back(a.params_in);
    write_manifest(manifest_path_for(a.out), "simulate", inputs,
                   {{"variant", a.variant},
                    {"users", a.users},
                    {"items", a.items},
                    {"horizon", a.horizon}},
                   a.seed, outputs);
    return 0;
}

struct RecoverArgs {
    std::string variant = "mhme";
    int users = 200;
    int items = 50;
    double horizon = 365.0;
    std::uint64_t seed = 0;
    int iterations = 3000;
    double learning_rate = 0.1;
    double tolerance = 1e-3;
    std::string out;
};

int run_recover(const RecoverArgs& a) {
    mhm::ModelSpec spec;
    spec.variant = mhm::parse_variant(a.variant);
    mhm::FitConfig config;
    config.iterations = a.iterations;
    config.learning_rate = a.learning_rate;
    config.tolerance = a.tolerance;
    config.seed = a.seed;
    const mhm::RecoveryResult r =
        mhm::recovery_experiment(spec, a.users, a.items, a.horizon, a.seed, config);
    std::cout << "events: " << r.n_events << "\n"
              << "spearman theta_u: " << r.spearman_theta_u << "\n"
              << "spearman kappa:   " << r.spearman_kappa << "\n"
              << "spearman alpha:   " << r.spearman_alpha << "\n"
              << "spearman beta:    " << r.spearman_beta << "\n";
    if (!a.out.empty()) {
        ordered_json j;
        j["format"] = "mhm-recovery";
        j["version"] = 1;
        j["variant"] = a.variant;
        j["n_events"] = r.n_events;
        j["spearman"] = {{"theta_u", r.spearman_theta_u},
                         {"kappa", r.spearman_kappa},
                         {"alpha", r.spearman_alpha},
                         {"beta", r.spearman_beta}};
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write file: " + a.out);
        out << j.dump(1) << '\n';
        write_manifest(manifest_path_for(a.out), "recover", {},
                       {{"variant", a.variant},
                        {"users", a.users},
                        {"items", a.items},
                        {"horizon", a.horizon},
                        {"iterations", a.iterations}},
                       a.seed, {a.out});
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mhm: price-driven mixed hazard models for purchase-return prediction"};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);
    int threads = 1; // reserved: library paths are currently single-threaded
    app.add_option("--threads", threads, "cap on worker threads")->check(CLI::PositiveNumber);

    IngestArgs ingest;
    CLI::App* c = app.add_subcommand("ingest", "parse a transaction CSV into an event log");
    c->add_option("--format", ingest.format, "input schema")
        ->check(CLI::IsMember({"online-retail", "generic"}))
        ->required();
    c->add_option("--input", ingest.input, "source CSV")->required()->check(CLI::ExistingFile);
    c->add_option("--window-start", ingest.window_start, "observation window start (datetime)");
    c->add_option("--window-end", ingest.window_end, "observation window end (datetime)");
    c->add_option("--min-degree", ingest.min_degree, "iterated min purchases per user/item");
    c->add_option("--out", ingest.out, "output event-log JSON")->required();
    c->add_option("--split-day", ingest.split_day, "also split train/test at this day offset");
    c->add_option("--test-out", ingest.test_out, "test event-log JSON (with --split-day)");
    c->callback([&] { std::exit(run_ingest(ingest)); });

    FitArgs fit;
    c = app.add_subcommand("fit", "fit a model variant to an event log");
    c->add_option("--log", fit.log, "training event-log JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--variant", fit.variant, "pp|hp|cc|ib|mhml|mhme");
    c->add_option("--config", fit.config_file, "key = value config file; flags override")
        ->check(CLI::ExistingFile);
    c->add_option("--out", fit.out, "output checkpoint JSON")->required();
    c->add_option("--iterations", fit.iterations, "gradient steps");
    c->add_option("--learning-rate", fit.learning_rate, "Adagrad base step");
    c->add_option("--mc-samples", fit.mc_samples, "Monte Carlo samples per step");
    c->add_option("--seed", fit.seed, "random seed");
    c->add_option("--tolerance", fit.tolerance, "ELBO moving-average stopping tolerance");
    c->add_option("--precursor-cap", fit.precursor_cap, "most recent precursors kept (<=0: all)");
    c->add_flag("--learn-sigma", [&fit](std::int64_t) { fit.learn_sigma = true; },
                "learn the decay rate instead of fixing it");
    c->callback([&] { std::exit(run_fit(fit)); });

    PredictArgs predict;
    c = app.add_subcommand("predict", "expected return times for test events");
    c->add_option("--model", predict.model, "checkpoint JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--test", predict.test, "test event-log JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--deadlines", predict.deadlines, "deadline days (comma separated)")
        ->required()
        ->delimiter(',');
    c->add_option("--out", predict.out, "output predictions CSV")->required();
    c->add_flag("--same-item-only", predict.same_item_only, "predict the anchor event's item");
    c->callback([&] { std::exit(run_predict(predict)); });

    EvalArgs evalArgs;
    c = app.add_subcommand("eval", "evaluation report over one or more models");
    c->add_option("--models", evalArgs.models, "checkpoint JSONs (comma separated)")
        ->required()
        ->delimiter(',');
    c->add_option("--test", evalArgs.test, "test event-log JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out-dir", evalArgs.out_dir, "directory for the report CSVs")->required();
    c->add_option("--deadlines", evalArgs.deadlines, "deadline days")->delimiter(',');
    c->add_option("--max-order", evalArgs.max_order, "purchase orders in the breakdown");
    c->add_flag("--same-item-only", evalArgs.same_item_only, "predict the anchor event's item");
    c->add_flag("--drop-late-truth", evalArgs.drop_late_truth,
                "drop events past the deadline instead of capping their duration");
    c->callback([&] { std::exit(run_eval(evalArgs)); });

    SimulateArgs sim;
    c = app.add_subcommand("simulate", "draw an event log from the generative model");
    c->add_option("--variant", sim.variant, "pp|hp|cc|ib|mhml|mhme");
    c->add_option("--users", sim.users, "number of users")->check(CLI::PositiveNumber);
    c->add_option("--items", sim.items, "number of items")->check(CLI::PositiveNumber);
    c->add_option("--horizon", sim.horizon, "days simulated")->check(CLI::PositiveNumber);
    c->add_option("--seed", sim.seed, "random seed");
    c->add_option("--out", sim.out, "output generic event CSV")->required();
    c->add_option("--params-out", sim.params_out, "ground-truth parameter JSON");
    c->add_option("--params-in", sim.params_in, "simulate from an existing parameter JSON")
        ->check(CLI::ExistingFile);
    c->callback([&] { std::exit(run_simulate(sim)); });

    RecoverArgs recover;
    c = app.add_subcommand("recover", "simulate, refit, and report rank correlations");
    c->add_option("--variant", recover.variant, "pp|hp|cc|ib|mhml|mhme");
    c->add_option("--users", recover.users, "number of users")->check(CLI::PositiveNumber);
    c->add_option("--items", recover.items, "number of items")->check(CLI::PositiveNumber);
    c->add_option("--horizon", recover.horizon, "days simulated")->check(CLI::PositiveNumber);
    c->add_option("--seed", recover.seed, "random seed");
    c->add_option("--iterations", recover.iterations, "gradient steps");
    c->add_option("--learning-rate", recover.learning_rate, "Adagrad base step");
    c->add_option("--tolerance", recover.tolerance, "ELBO stopping tolerance");
    c->add_option("--out", recover.out, "recovery report JSON");
    c->callback([&] { std::exit(run_recover(recover)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const mhm::SchemaError& e) {
        std::cerr << "error: schema: " << e.what() << "\n";
        return kExitSchema;
    } catch (const mhm::EmptyDatasetError& e) {
        std::cerr << "error: empty-dataset: " << e.what() << "\n";
        return kExitEmpty;
    } catch (const mhm::UnknownIdError& e) {
        std::cerr << "error: unknown-id: " << e.what() << "\n";
        return kExitUnknown;
    } catch (const mhm::ColdStartError& e) {
        std::cerr << "error: cold-start: " << e.what() << "\n";
        return kExitUnknown;
    } catch (const mhm::FitDivergedError& e) {
        std::cerr << "error: fit-diverged: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const mhm::NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
