#include "mhm/predict.hpp"

#include "mhm/errors.hpp"
#include "mhm/hazard.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace mhm {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_known(const FittedModel& model, int user, int item) {
    if (user < 0 || user >= model.train.n_users() || item < 0 || item >= model.train.n_items()) {
        throw ColdStartError("prediction requested for unindexed user/item");
    }
    if (model.train.events_of_user(user).empty()) {
        throw ColdStartError("prediction requested for user with no training history: " +
                             std::to_string(user));
    }
}

// Influence stream for a (user, item) prediction context, drawn from the
// training log only, most recent `cap` events.
std::vector<PrecursorEvent> training_stream(const FittedModel& model, int user, int item) {
    if (!has_social(model.spec.variant)) return {};
    const std::vector<int>& idx = is_self_exciting(model.spec.variant)
                                      ? model.train.events_of_user(user)
                                      : model.train.events_of_item(item);
    std::size_t lo = 0;
    if (model.spec.precursor_cap > 0 && idx.size() > static_cast<std::size_t>(model.spec.precursor_cap)) {
        lo = idx.size() - static_cast<std::size_t>(model.spec.precursor_cap);
    }
    std::vector<PrecursorEvent> stream;
    stream.reserve(idx.size() - lo);
    for (std::size_t i = lo; i < idx.size(); ++i) {
        const PurchaseEvent& e = model.train.events()[static_cast<std::size_t>(idx[i])];
        stream.push_back({e.user, e.time});
    }
    return stream;
}

double last_event_time(const FittedModel& model, int user) {
    const std::vector<int>& idx = model.train.events_of_user(user);
    return model.train.events()[static_cast<std::size_t>(idx.back())].time;
}

} // namespace

double predict_hazard(const FittedModel& model, int user, int item, double t) {
    check_known(model, user, item);
    const std::vector<PrecursorEvent> stream = training_stream(model, user, item);
    Precursors pre;
    for (const PrecursorEvent& e : stream) {
        if (e.time < t) pre.entries.push_back({e.user, t - e.time});
    }
    return hazard_rate(model.spec, model.params, user, item, t, pre);
}

ReturnTimePrediction expected_return_time(const FittedModel& model, int user, int item, int deadline,
                                          std::optional<double> anchor) {
    if (deadline <= 0) throw std::invalid_argument("expected_return_time: deadline must be positive");
    check_known(model, user, item);
    const double a = anchor.value_or(last_event_time(model, user));
    const std::vector<PrecursorEvent> stream = training_stream(model, user, item);
    ReturnTimePrediction out;
    out.user = user;
    out.item = item;
    out.deadline = deadline;
    out.survival_curve =
        survival_curve(model.spec, model.params, user, item, a, stream, deadline);
    out.expected_days =
        std::accumulate(out.survival_curve.begin(), out.survival_curve.end(), 0.0);
    return out;
}

std::vector<double> sample_spend_posterior(const FittedModel& model, int user, int n_samples,
                                           std::uint64_t seed) {
    if (n_samples <= 0) throw std::invalid_argument("sample_spend_posterior: n_samples must be positive");
    if (user < 0 || user >= model.train.n_users() || model.train.events_of_user(user).empty()) {
        throw ColdStartError("spend posterior requested for user with no training history");
    }
    const int n_purchases = static_cast<int>(model.train.events_of_user(user).size());
    const int shape = std::max(n_purchases, 1);
    const double kappa = model.params.kappa_u.at(static_cast<std::size_t>(user));
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> bid(static_cast<double>(shape), 1.0 / kappa);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        double total = 0.0;
        for (int i = 0; i < n_purchases; ++i) total += bid(rng);
        out.push_back(total);
    }
    return out;
}

// ---- checkpoint ------------------------------------------------------

void save_checkpoint(const std::string& path, const FittedModel& model) {
    ordered_json j;
    j["format"] = "mhm-checkpoint";
    j["version"] = 1;
    j["spec"] = {{"variant", variant_name(model.spec.variant)},
                 {"precursor_cap", model.spec.precursor_cap},
                 {"time_bucket_days", model.spec.time_bucket_days},
                 {"horizon_days", model.spec.horizon_days}};
    j["config"] = {{"iterations", model.config.iterations},
                   {"learning_rate", model.config.learning_rate},
                   {"mc_samples", model.config.mc_samples},
                   {"seed", model.config.seed},
                   {"tolerance", model.config.tolerance},
                   {"trace_every", model.config.trace_every},
                   {"kappa_prior_shape", model.config.kappa_prior_shape},
                   {"kappa_prior_rate", model.config.kappa_prior_rate},
                   {"w_step_std", model.config.w_step_std},
                   {"theta_bound", model.config.theta_bound},
                   {"ab_bound", model.config.ab_bound},
                   {"sigma_bound", model.config.sigma_bound},
                   {"sigma_init", model.config.sigma_init},
                   {"learn_sigma", model.config.learn_sigma}};
    j["params"] = {{"theta_u", model.params.theta_u}, {"theta_o", model.params.theta_o},
                   {"kappa_u", model.params.kappa_u}, {"alpha_u", model.params.alpha_u},
                   {"beta_u", model.params.beta_u},   {"w", model.params.w},
                   {"sigma", model.params.sigma}};
    j["q"] = {{"mu", model.q.mu}, {"log_std", model.q.log_std}};
    ordered_json trace = ordered_json::array();
    for (const auto& [step, elbo] : model.trace) trace.push_back({step, elbo});
    j["trace"] = std::move(trace);
    j["user_ids"] = model.user_ids;
    j["item_ids"] = model.item_ids;
    j["train"] = {{"t_end", model.train.t_end()}};
    ordered_json events = ordered_json::array();
    for (const PurchaseEvent& e : model.train.events()) {
        events.push_back({e.user, e.item, e.time, e.price});
    }
    j["train"]["events"] = std::move(events);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << '\n';
}

FittedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("invalid checkpoint file: ") + e.what());
    }
    if (j.value("format", "") != "mhm-checkpoint") {
        throw SchemaError("not a checkpoint file: " + path);
    }
    FittedModel m;
    const auto& spec = j.at("spec");
    m.spec.variant = parse_variant(spec.at("variant").get<std::string>());
    m.spec.precursor_cap = spec.at("precursor_cap").get<int>();
    m.spec.time_bucket_days = spec.at("time_bucket_days").get<int>();
    m.spec.horizon_days = spec.at("horizon_days").get<int>();
    const auto& cfg = j.at("config");
    m.config.iterations = cfg.at("iterations").get<int>();
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.mc_samples = cfg.at("mc_samples").get<int>();
    m.config.seed = cfg.at("seed").get<std::uint64_t>();
    m.config.tolerance = cfg.at("tolerance").get<double>();
    m.config.trace_every = cfg.at("trace_every").get<int>();
    m.config.kappa_prior_shape = cfg.at("kappa_prior_shape").get<double>();
    m.config.kappa_prior_rate = cfg.at("kappa_prior_rate").get<double>();
    m.config.w_step_std = cfg.at("w_step_std").get<double>();
    m.config.theta_bound = cfg.at("theta_bound").get<double>();
    m.config.ab_bound = cfg.at("ab_bound").get<double>();
    m.config.sigma_bound = cfg.at("sigma_bound").get<double>();
    m.config.sigma_init = cfg.at("sigma_init").get<double>();
    m.config.learn_sigma = cfg.at("learn_sigma").get<bool>();
    const auto& params = j.at("params");
    m.params.theta_u = params.at("theta_u").get<std::vector<double>>();
    m.params.theta_o = params.at("theta_o").get<std::vector<double>>();
    m.params.kappa_u = params.at("kappa_u").get<std::vector<double>>();
    m.params.alpha_u = params.at("alpha_u").get<std::vector<double>>();
    m.params.beta_u = params.at("beta_u").get<std::vector<double>>();
    m.params.w = params.at("w").get<std::vector<double>>();
    m.params.sigma = params.at("sigma").get<double>();
    m.q.mu = j.at("q").at("mu").get<std::vector<double>>();
    m.q.log_std = j.at("q").at("log_std").get<std::vector<double>>();
    for (const auto& row : j.at("trace")) {
        m.trace.emplace_back(row.at(0).get<int>(), row.at(1).get<double>());
    }
    m.user_ids = j.at("user_ids").get<std::vector<std::string>>();
    m.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    std::vector<PurchaseEvent> events;
    for (const auto& row : j.at("train").at("events")) {
        events.push_back({row.at(0).get<int>(), row.at(1).get<int>(), row.at(2).get<double>(),
                          row.at(3).get<double>()});
    }
    m.train = EventLog(std::move(events), j.at("train").at("t_end").get<double>(),
                       static_cast<int>(m.user_ids.size()), static_cast<int>(m.item_ids.size()));
    return m;
}

} // namespace mhm
