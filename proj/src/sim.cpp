#include "mhm/sim.hpp"

#include "mhm/errors.hpp"
#include "mhm/hazard.hpp"
#include "mhm/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace mhm {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// splitmix64: decorrelates the per-user sub-generator seeds.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void validate_params(const ModelSpec& spec, const ModelParams& p, int n_users, int n_items) {
    const std::size_t m = static_cast<std::size_t>(n_users);
    const std::size_t n = static_cast<std::size_t>(n_items);
    if (p.theta_u.size() != m || p.theta_o.size() != n) {
        throw std::invalid_argument("simulate_events: theta dimensions do not match population");
    }
    if (has_price(spec.variant) && p.kappa_u.size() != m) {
        throw std::invalid_argument("simulate_events: kappa_u must have one entry per user");
    }
    if (has_social(spec.variant) && (p.alpha_u.size() != m || p.beta_u.size() != m)) {
        throw std::invalid_argument("simulate_events: alpha_u/beta_u must have one entry per user");
    }
    if (has_weight(spec.variant) && p.w.empty()) {
        throw std::invalid_argument("simulate_events: w grid must be non-empty for this variant");
    }
    if (!(p.sigma > 0.0)) throw std::invalid_argument("simulate_events: sigma must be positive");
}

// Per-pair intensity at absolute time t, given the start-of-day decayed
// influence sum `g` for the relevant stream (per item, or the user's own
// history for the self-exciting variant). No floor is applied: the floor
// is a likelihood-side numerical guard, not part of the process.
double pair_intensity(const ModelSpec& spec, const ModelParams& p, int user, int item, double t,
                      double g_decayed) {
    const double base = p.theta_u[static_cast<std::size_t>(user)] *
                        p.theta_o[static_cast<std::size_t>(item)];
    switch (spec.variant) {
        case Variant::PP:
            return base;
        case Variant::HP:
        case Variant::IB:
            return base + p.beta_u[static_cast<std::size_t>(user)] * g_decayed;
        case Variant::CC:
            return base * std::exp(std::min(weight_at(spec, p, t) *
                                                p.beta_u[static_cast<std::size_t>(user)] * g_decayed,
                                            kMaxCoxExponent));
        case Variant::MHMl:
            return base * p.kappa_u[static_cast<std::size_t>(user)] +
                   p.beta_u[static_cast<std::size_t>(user)] * g_decayed;
        case Variant::MHMe:
            return base * p.kappa_u[static_cast<std::size_t>(user)] *
                   std::exp(std::min(weight_at(spec, p, t) *
                                         p.beta_u[static_cast<std::size_t>(user)] * g_decayed,
                                     kMaxCoxExponent));
    }
    return base;
}

} // namespace

EventLog simulate_events(const ModelSpec& spec, const ModelParams& params, int n_users, int n_items,
                         double horizon_days, std::uint64_t seed) {
    if (n_users <= 0 || n_items <= 0) {
        throw std::invalid_argument("simulate_events: population sizes must be positive");
    }
    if (!(horizon_days > 0.0)) {
        throw std::invalid_argument("simulate_events: horizon must be positive");
    }
    validate_params(spec, params, n_users, n_items);

    const bool social = has_social(spec.variant);
    const bool selfx = is_self_exciting(spec.variant);
    const bool price = has_price(spec.variant);
    const double day_decay = std::exp(-params.sigma);

    // Start-of-day decayed influence sums: per item for neighbor variants,
    // per user for the self-exciting one. Each entry already carries the
    // sender's alpha, so the target only multiplies its beta in.
    std::vector<double> g_item(social && !selfx ? static_cast<std::size_t>(n_items) : 0, 0.0);
    std::vector<double> g_self(selfx ? static_cast<std::size_t>(n_users) : 0, 0.0);

    std::vector<std::mt19937_64> rngs;
    rngs.reserve(static_cast<std::size_t>(n_users));
    for (int u = 0; u < n_users; ++u) {
        rngs.emplace_back(mix64(seed ^ (static_cast<std::uint64_t>(u) + 1)));
    }

    std::vector<int> counts(static_cast<std::size_t>(n_users), 0);
    std::vector<PurchaseEvent> events;
    std::vector<PurchaseEvent> today;
    std::vector<double> lam(static_cast<std::size_t>(n_items), 0.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n_days = static_cast<int>(std::ceil(horizon_days - 1e-9));
    for (int d = 0; d < n_days; ++d) {
        const double day_start = static_cast<double>(d);
        const double day_end = std::min(day_start + 1.0, horizon_days);
        today.clear();

        for (int u = 0; u < n_users; ++u) {
            // Within a day the visible history is frozen, w(t) is constant
            // (bucket edges fall on whole days), and the decay kernel is
            // monotone, so each per-item intensity attains its maximum at
            // one of the day's endpoints.
            auto g_of = [&](int item) {
                return selfx ? g_self[static_cast<std::size_t>(u)]
                             : (social ? g_item[static_cast<std::size_t>(item)] : 0.0);
            };
            const double end_decay = std::exp(-params.sigma * (day_end - day_start));
            double bound = 0.0;
            for (int o = 0; o < n_items; ++o) {
                const double g = g_of(o);
                bound += std::max(pair_intensity(spec, params, u, o, day_start, g),
                                  pair_intensity(spec, params, u, o, day_end, g * end_decay));
            }
            if (!(bound > 0.0)) continue;

            std::mt19937_64& rng = rngs[static_cast<std::size_t>(u)];
            std::exponential_distribution<double> gap(bound);
            double t = day_start;
            while (true) {
                t += gap(rng);
                if (t >= day_end) break;
                const double tdec = std::exp(-params.sigma * (t - day_start));
                double total = 0.0;
                for (int o = 0; o < n_items; ++o) {
                    lam[static_cast<std::size_t>(o)] =
                        pair_intensity(spec, params, u, o, t, g_of(o) * tdec);
                    total += lam[static_cast<std::size_t>(o)];
                }
                if (total > bound * (1.0 + 1e-9)) {
                    throw NumericError("simulate_events: thinning bound violated");
                }
                if (unit(rng) * bound >= total) continue; // rejected proposal
                // Accepted: pick the item proportionally to its intensity.
                double pick = unit(rng) * total;
                int item = n_items - 1;
                for (int o = 0; o < n_items; ++o) {
                    pick -= lam[static_cast<std::size_t>(o)];
                    if (pick <= 0.0) {
                        item = o;
                        break;
                    }
                }
                const int shape = std::max(counts[static_cast<std::size_t>(u)], 1);
                double bid = 0.0;
                if (price) {
                    std::gamma_distribution<double> bid_dist(
                        static_cast<double>(shape),
                        1.0 / params.kappa_u[static_cast<std::size_t>(u)]);
                    bid = bid_dist(rng);
                } else {
                    bid = 1.0;
                }
                today.push_back({u, item, t, bid});
                ++counts[static_cast<std::size_t>(u)];
            }
        }

        // Day close: today's events decay into the start-of-next-day sums
        // and only then become visible precursors.
        if (selfx) {
            for (double& g : g_self) g *= day_decay;
        } else if (social) {
            for (double& g : g_item) g *= day_decay;
        }
        for (const PurchaseEvent& e : today) {
            const double contrib =
                (social ? params.alpha_u[static_cast<std::size_t>(e.user)] : 0.0) *
                std::exp(-params.sigma * (day_start + 1.0 - e.time));
            if (selfx) {
                g_self[static_cast<std::size_t>(e.user)] += contrib;
            } else if (social) {
                g_item[static_cast<std::size_t>(e.item)] += contrib;
            }
        }
        events.insert(events.end(), today.begin(), today.end());
    }

    return EventLog(std::move(events), horizon_days, n_users, n_items);
}

ModelParams draw_recovery_params(const ModelSpec& spec, int n_users, int n_items,
                                 double horizon_days, std::uint64_t seed) {
    if (n_users <= 0 || n_items <= 0) {
        throw std::invalid_argument("draw_recovery_params: population sizes must be positive");
    }
    const bool social = has_social(spec.variant);
    const bool price = has_price(spec.variant);
    std::mt19937_64 rng(mix64(seed ^ 0x7265636f76657279ULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    ModelParams p;
    p.sigma = 0.1;
    p.theta_o.resize(static_cast<std::size_t>(n_items));
    double theta_sum = 0.0;
    for (double& v : p.theta_o) {
        v = (0.5 + unit(rng)) / static_cast<double>(n_items);
        theta_sum += v;
    }
    p.theta_u.resize(static_cast<std::size_t>(n_users));
    p.kappa_u.assign(static_cast<std::size_t>(n_users), 1.0);
    p.alpha_u.assign(static_cast<std::size_t>(n_users), 0.0);
    p.beta_u.assign(static_cast<std::size_t>(n_users), 0.0);
    for (int u = 0; u < n_users; ++u) {
        const std::size_t i = static_cast<std::size_t>(u);
        if (price) {
            // Log-uniform over a decade so price perceptions rank cleanly.
            p.kappa_u[i] = std::exp(std::log(0.01) + unit(rng) * std::log(10.0));
        }
        // Target a baseline purchase rate of 0.04-0.12 events/day so a
        // one-year window yields a usable history per user.
        const double rate = 0.04 + 0.08 * unit(rng);
        p.theta_u[i] = rate / (theta_sum * (price ? p.kappa_u[i] : 1.0));
        if (social) {
            p.alpha_u[i] = 0.05 + 0.25 * unit(rng);
            p.beta_u[i] = 0.05 + 0.25 * unit(rng);
        }
    }
    const int buckets = weight_bucket_count(spec, horizon_days);
    p.w.assign(static_cast<std::size_t>(buckets), has_weight(spec.variant) ? 0.2 : 0.0);
    return p;
}

RecoveryResult recovery_experiment(const ModelSpec& spec, int n_users, int n_items,
                                   double horizon_days, std::uint64_t seed,
                                   const FitConfig& config) {
    RecoveryResult out;
    out.truth = draw_recovery_params(spec, n_users, n_items, horizon_days, seed);
    const EventLog log = simulate_events(spec, out.truth, n_users, n_items, horizon_days, seed);
    out.n_events = log.size();

    const FitResult fitted = fit(spec, log, config);
    out.recovered = fitted.params;

    out.spearman_theta_u = spearman(out.truth.theta_u, out.recovered.theta_u);
    out.spearman_kappa =
        has_price(spec.variant) ? spearman(out.truth.kappa_u, out.recovered.kappa_u) : kNaN;
    out.spearman_alpha =
        has_social(spec.variant) ? spearman(out.truth.alpha_u, out.recovered.alpha_u) : kNaN;
    out.spearman_beta =
        has_social(spec.variant) ? spearman(out.truth.beta_u, out.recovered.beta_u) : kNaN;
    return out;
}

void save_params_json(const std::string& path, const ModelSpec& spec, const ModelParams& params) {
    ordered_json j;
    j["format"] = "mhm-params";
    j["version"] = 1;
    j["spec"] = {{"variant", variant_name(spec.variant)},
                 {"precursor_cap", spec.precursor_cap},
                 {"time_bucket_days", spec.time_bucket_days},
                 {"horizon_days", spec.horizon_days}};
    j["params"] = {{"theta_u", params.theta_u}, {"theta_o", params.theta_o},
                   {"kappa_u", params.kappa_u}, {"alpha_u", params.alpha_u},
                   {"beta_u", params.beta_u},   {"w", params.w},
                   {"sigma", params.sigma}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << '\n';
}

ModelParams load_params_json(const std::string& path, ModelSpec* spec_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("invalid parameter file: ") + e.what());
    }
    if (j.value("format", "") != "mhm-params") throw SchemaError("not a parameter file: " + path);
    if (spec_out != nullptr) {
        const auto& spec = j.at("spec");
        spec_out->variant = parse_variant(spec.at("variant").get<std::string>());
        spec_out->precursor_cap = spec.at("precursor_cap").get<int>();
        spec_out->time_bucket_days = spec.at("time_bucket_days").get<int>();
        spec_out->horizon_days = spec.at("horizon_days").get<int>();
    }
    const auto& params = j.at("params");
    ModelParams p;
    p.theta_u = params.at("theta_u").get<std::vector<double>>();
    p.theta_o = params.at("theta_o").get<std::vector<double>>();
    p.kappa_u = params.at("kappa_u").get<std::vector<double>>();
    p.alpha_u = params.at("alpha_u").get<std::vector<double>>();
    p.beta_u = params.at("beta_u").get<std::vector<double>>();
    p.w = params.at("w").get<std::vector<double>>();
    p.sigma = params.at("sigma").get<double>();
    return p;
}

} // namespace mhm
