#include "mhm/hazard.hpp"

#include "mhm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mhm {

namespace {

int grid_days(double duration) {
    if (duration <= 0.0) return 0;
    // tolerate fp noise just above an integer day count
    return static_cast<int>(std::ceil(duration - 1e-9));
}

int bucket_of(const ModelSpec& spec, int n_buckets, double t) {
    int b = static_cast<int>(std::floor(t / spec.time_bucket_days));
    if (b < 0) b = 0;
    if (b >= n_buckets) b = n_buckets - 1;
    return b;
}

// First grid day (1-based, relative to anchor) at which a stream event is
// strictly in the past.
int entry_day(double anchor, double event_time) {
    const int tau = static_cast<int>(std::floor(event_time - anchor)) + 1;
    return std::max(tau, 1);
}

// Reusable buffers for the per-observation day grid.
struct Scratch {
    std::vector<double> lam;   // intensity per grid day
    std::vector<double> g;     // decayed alpha-sum per grid day
    std::vector<double> f;     // day multiplier for precursor gradients
    std::vector<int> wbk;      // weight bucket per grid day
    std::vector<double> suffix_r;
    std::vector<double> suffix_rd;
    std::vector<double> dec;   // per-precursor decay at the event time
};

// Log-likelihood contribution of one observation; optionally accumulates
// the gradient. Shared by the likelihood, the public cumulative hazard,
// and prediction (through build_observations-shaped contexts).
double observation_loglik(const ModelParams& p, const ModelSpec& spec, int n_buckets,
                          const Observation& o, std::span<const PrecursorEvent> stream,
                          ParamGrad* grad, Scratch& sc, double* cum_hazard_out = nullptr) {
    const Variant v = spec.variant;
    const bool social = has_social(v);
    const bool selfx = is_self_exciting(v);
    const bool price = has_price(v);
    const bool wlink = has_weight(v);

    const int u = o.user;
    const double th = p.theta_u[static_cast<std::size_t>(u)] * p.theta_o[static_cast<std::size_t>(o.item)];
    const double kap = price ? p.kappa_u[static_cast<std::size_t>(u)] : 1.0;
    const double base = th * kap;
    const double beta = social ? p.beta_u[static_cast<std::size_t>(u)] : 0.0;
    const double sigma = p.sigma;
    const double day_decay = std::exp(-sigma);

    const int days = grid_days(o.duration);
    sc.lam.assign(static_cast<std::size_t>(days) + 1, 0.0);
    sc.g.assign(static_cast<std::size_t>(days) + 1, 0.0);
    sc.f.assign(static_cast<std::size_t>(days) + 2, 0.0);
    sc.wbk.assign(static_cast<std::size_t>(days) + 1, 0);

    // forward pass over the daily grid
    double cum = 0.0;
    double gsum = 0.0;
    std::size_t ptr = 0;
    for (int tau = 1; tau <= days; ++tau) {
        const double s = o.anchor + tau;
        if (social) {
            gsum *= day_decay;
            while (ptr < stream.size() && stream[ptr].time < s) {
                const double a = selfx ? p.alpha_u[static_cast<std::size_t>(u)]
                                       : p.alpha_u[static_cast<std::size_t>(stream[ptr].user)];
                gsum += a * std::exp(-sigma * (s - stream[ptr].time));
                ++ptr;
            }
        }
        double lam;
        if (v == Variant::PP) {
            lam = base;
        } else if (wlink) {
            const int bk = bucket_of(spec, n_buckets, s);
            sc.wbk[static_cast<std::size_t>(tau)] = bk;
            double x = p.w[static_cast<std::size_t>(bk)] * beta * gsum;
            if (x > kMaxCoxExponent) x = kMaxCoxExponent;
            lam = base * std::exp(x);
        } else {
            lam = base + beta * gsum;
        }
        sc.lam[static_cast<std::size_t>(tau)] = lam;
        sc.g[static_cast<std::size_t>(tau)] = gsum;
        cum += std::max(lam, kHazardFloor);
    }
    if (cum_hazard_out != nullptr) *cum_hazard_out = cum;

    double ll = -cum;

    // exact-time intensity at the event
    double lam_event = 0.0;
    double ge = 0.0;
    double de_sum = 0.0; // sum alpha * dt * decay, for the sigma gradient
    double wv_e = 0.0;
    int wbk_e = 0;
    bool eclamp_e = false;
    if (!o.censored) {
        if (social) {
            sc.dec.assign(stream.size(), 0.0);
            for (std::size_t j = 0; j < stream.size(); ++j) {
                const double dt = o.end - stream[j].time;
                const double a = selfx ? p.alpha_u[static_cast<std::size_t>(u)]
                                       : p.alpha_u[static_cast<std::size_t>(stream[j].user)];
                const double d = std::exp(-sigma * dt);
                sc.dec[j] = d;
                ge += a * d;
                de_sum += a * dt * d;
            }
        }
        if (v == Variant::PP) {
            lam_event = base;
        } else if (wlink) {
            wbk_e = bucket_of(spec, n_buckets, o.end);
            wv_e = p.w[static_cast<std::size_t>(wbk_e)];
            double x = wv_e * beta * ge;
            if (x > kMaxCoxExponent) {
                x = kMaxCoxExponent;
                eclamp_e = true;
            }
            lam_event = base * std::exp(x);
        } else {
            lam_event = base + beta * ge;
        }
        ll += std::log(std::max(lam_event, kHazardFloor));
        if (price) {
            ll += bid_logpdf(o.price, o.bid_shape, p.kappa_u[static_cast<std::size_t>(u)]);
        }
    }

    if (grad == nullptr) return ll;

    // ---- gradient ----
    const double theta_u_v = p.theta_u[static_cast<std::size_t>(u)];
    const double theta_o_v = p.theta_o[static_cast<std::size_t>(o.item)];

    // cumulative-hazard part (enters with a minus sign)
    double s_tu = 0.0, s_to = 0.0, s_k = 0.0, s_b = 0.0;
    for (int tau = 1; tau <= days; ++tau) {
        const double lam = sc.lam[static_cast<std::size_t>(tau)];
        if (lam <= kHazardFloor) continue;
        double link = 1.0; // d lam / d base, times kap split below
        double fday = 0.0;
        if (wlink) {
            const double wv = p.w[static_cast<std::size_t>(sc.wbk[static_cast<std::size_t>(tau)])];
            const double x = wv * beta * sc.g[static_cast<std::size_t>(tau)];
            const bool clamped = x > kMaxCoxExponent;
            link = lam / base; // = exp(clamped x); base > 0 when lam > floor
            if (!clamped) {
                grad->w[static_cast<std::size_t>(sc.wbk[static_cast<std::size_t>(tau)])] -=
                    lam * beta * sc.g[static_cast<std::size_t>(tau)];
                s_b += lam * wv * sc.g[static_cast<std::size_t>(tau)];
                fday = lam * wv * beta;
            }
        } else if (v != Variant::PP) {
            s_b += sc.g[static_cast<std::size_t>(tau)];
            fday = beta;
        }
        s_tu += theta_o_v * kap * link;
        s_to += theta_u_v * kap * link;
        s_k += th * link;
        sc.f[static_cast<std::size_t>(tau)] = fday;
    }
    grad->theta_u[static_cast<std::size_t>(u)] -= s_tu;
    grad->theta_o[static_cast<std::size_t>(o.item)] -= s_to;
    if (price) grad->kappa_u[static_cast<std::size_t>(u)] -= s_k;
    if (social) grad->beta_u[static_cast<std::size_t>(u)] -= s_b;

    // suffix recurrences turn the per-day, per-precursor double sum into
    // one pass: R(tau) = f(tau) + e^-sigma R(tau+1)
    if (social && days > 0) {
        sc.suffix_r.assign(static_cast<std::size_t>(days) + 2, 0.0);
        sc.suffix_rd.assign(static_cast<std::size_t>(days) + 2, 0.0);
        for (int tau = days; tau >= 1; --tau) {
            sc.suffix_r[static_cast<std::size_t>(tau)] =
                sc.f[static_cast<std::size_t>(tau)] + day_decay * sc.suffix_r[static_cast<std::size_t>(tau) + 1];
            sc.suffix_rd[static_cast<std::size_t>(tau)] =
                day_decay * (sc.suffix_r[static_cast<std::size_t>(tau) + 1] +
                             sc.suffix_rd[static_cast<std::size_t>(tau) + 1]);
        }
        for (std::size_t j = 0; j < stream.size(); ++j) {
            const int tau_e = entry_day(o.anchor, stream[j].time);
            if (tau_e > days) continue;
            const double delta = o.anchor + tau_e - stream[j].time;
            const double e0 = std::exp(-sigma * delta);
            const int a_idx = selfx ? u : stream[j].user;
            grad->alpha_u[static_cast<std::size_t>(a_idx)] -= e0 * sc.suffix_r[static_cast<std::size_t>(tau_e)];
            grad->sigma += p.alpha_u[static_cast<std::size_t>(a_idx)] * e0 *
                           (delta * sc.suffix_r[static_cast<std::size_t>(tau_e)] +
                            sc.suffix_rd[static_cast<std::size_t>(tau_e)]);
        }
    }

    // event-time part
    if (!o.censored && lam_event > kHazardFloor) {
        const double inv = 1.0 / lam_event;
        double link = 1.0;
        if (wlink) link = lam_event / base;
        grad->theta_u[static_cast<std::size_t>(u)] += inv * theta_o_v * kap * link;
        grad->theta_o[static_cast<std::size_t>(o.item)] += inv * theta_u_v * kap * link;
        if (price) grad->kappa_u[static_cast<std::size_t>(u)] += inv * th * link;
        if (social) {
            if (wlink) {
                if (!eclamp_e) {
                    grad->w[static_cast<std::size_t>(wbk_e)] += inv * lam_event * beta * ge;
                    grad->beta_u[static_cast<std::size_t>(u)] += inv * lam_event * wv_e * ge;
                    const double fe = inv * lam_event * wv_e * beta;
                    for (std::size_t j = 0; j < stream.size(); ++j) {
                        const int a_idx = selfx ? u : stream[j].user;
                        grad->alpha_u[static_cast<std::size_t>(a_idx)] += fe * sc.dec[j];
                    }
                    grad->sigma -= fe * de_sum;
                }
            } else {
                grad->beta_u[static_cast<std::size_t>(u)] += inv * ge;
                for (std::size_t j = 0; j < stream.size(); ++j) {
                    const int a_idx = selfx ? u : stream[j].user;
                    grad->alpha_u[static_cast<std::size_t>(a_idx)] += inv * beta * sc.dec[j];
                }
                grad->sigma -= inv * beta * de_sum;
            }
        }
    }

    // bid term
    if (!o.censored && price) {
        grad->kappa_u[static_cast<std::size_t>(u)] +=
            o.bid_shape / p.kappa_u[static_cast<std::size_t>(u)] - o.price;
    }

    return ll;
}

double likelihood_impl(const ModelParams& p, const ObservationSet& obs, ParamGrad* grad) {
    Scratch sc;
    double total = 0.0;
    for (std::size_t i = 0; i < obs.observations.size(); ++i) {
        const Observation& o = obs.observations[i];
        const double ll =
            observation_loglik(p, obs.spec, obs.n_buckets, o, obs.precursors_of(o), grad, sc);
        if (!std::isfinite(ll)) {
            throw NumericError(std::string("non-finite log-likelihood term (variant ") +
                               variant_name(obs.spec.variant) + ", observation " + std::to_string(i) +
                               ", user " + std::to_string(o.user) + ", item " + std::to_string(o.item) +
                               ")");
        }
        total += ll;
    }
    return total;
}

} // namespace

std::span<const PrecursorEvent> ObservationSet::precursors_of(const Observation& o) const {
    if (streams.empty()) return {};
    const int idx = is_self_exciting(spec.variant) ? o.user : o.item;
    const std::vector<PrecursorEvent>& s = streams[static_cast<std::size_t>(idx)];
    return std::span<const PrecursorEvent>(s).subspan(static_cast<std::size_t>(o.prec_lo),
                                                      static_cast<std::size_t>(o.prec_hi - o.prec_lo));
}

ObservationSet build_observations(const ModelSpec& spec, const EventLog& log) {
    ObservationSet set;
    set.spec = spec;
    set.t_end = log.t_end();
    set.n_users = log.n_users();
    set.n_items = log.n_items();
    set.n_buckets = weight_bucket_count(spec, log.t_end());

    const bool social = has_social(spec.variant);
    const bool selfx = is_self_exciting(spec.variant);
    if (social) {
        const int n_streams = selfx ? log.n_users() : log.n_items();
        set.streams.assign(static_cast<std::size_t>(n_streams), {});
        for (const PurchaseEvent& e : log.events()) {
            const int idx = selfx ? e.user : e.item;
            set.streams[static_cast<std::size_t>(idx)].push_back({e.user, e.time});
        }
    }

    const auto precursor_range = [&](int stream_idx, double end) -> std::pair<int, int> {
        if (!social) return {0, 0};
        const std::vector<PrecursorEvent>& s = set.streams[static_cast<std::size_t>(stream_idx)];
        const auto it = std::lower_bound(s.begin(), s.end(), end,
                                         [](const PrecursorEvent& a, double t) { return a.time < t; });
        const int hi = static_cast<int>(it - s.begin());
        int lo = 0;
        if (spec.precursor_cap > 0) lo = std::max(0, hi - spec.precursor_cap);
        return {lo, hi};
    };

    std::vector<double> last_time(static_cast<std::size_t>(log.n_users()), 0.0);
    std::vector<int> count(static_cast<std::size_t>(log.n_users()), 0);
    std::vector<int> last_item(static_cast<std::size_t>(log.n_users()), -1);

    for (const PurchaseEvent& e : log.events()) {
        Observation o;
        o.user = e.user;
        o.item = e.item;
        o.anchor = last_time[static_cast<std::size_t>(e.user)];
        o.end = e.time;
        o.duration = e.time - o.anchor;
        o.price = e.price;
        o.bid_shape = std::max(count[static_cast<std::size_t>(e.user)], 1);
        o.censored = false;
        const int stream_idx = selfx ? e.user : e.item;
        std::tie(o.prec_lo, o.prec_hi) = precursor_range(stream_idx, e.time);
        set.observations.push_back(o);
        last_time[static_cast<std::size_t>(e.user)] = e.time;
        last_item[static_cast<std::size_t>(e.user)] = e.item;
        ++count[static_cast<std::size_t>(e.user)];
    }

    // one censored tail per user, from the last event to the window close
    for (int u = 0; u < log.n_users(); ++u) {
        if (count[static_cast<std::size_t>(u)] == 0) continue;
        Observation o;
        o.user = u;
        o.item = last_item[static_cast<std::size_t>(u)];
        o.anchor = last_time[static_cast<std::size_t>(u)];
        o.end = log.t_end();
        o.duration = log.t_end() - o.anchor;
        o.censored = true;
        const int stream_idx = selfx ? u : o.item;
        std::tie(o.prec_lo, o.prec_hi) = precursor_range(stream_idx, o.end);
        set.observations.push_back(o);
    }
    return set;
}

void ParamGrad::resize_like(const ModelParams& p) {
    theta_u.assign(p.theta_u.size(), 0.0);
    theta_o.assign(p.theta_o.size(), 0.0);
    kappa_u.assign(p.kappa_u.size(), 0.0);
    alpha_u.assign(p.alpha_u.size(), 0.0);
    beta_u.assign(p.beta_u.size(), 0.0);
    w.assign(p.w.size(), 0.0);
    sigma = 0.0;
}

void ParamGrad::zero() {
    std::fill(theta_u.begin(), theta_u.end(), 0.0);
    std::fill(theta_o.begin(), theta_o.end(), 0.0);
    std::fill(kappa_u.begin(), kappa_u.end(), 0.0);
    std::fill(alpha_u.begin(), alpha_u.end(), 0.0);
    std::fill(beta_u.begin(), beta_u.end(), 0.0);
    std::fill(w.begin(), w.end(), 0.0);
    sigma = 0.0;
}

double decay(double dt, double sigma) {
    if (dt < 0.0) throw std::invalid_argument("decay: negative elapsed time");
    if (!(sigma > 0.0)) throw std::invalid_argument("decay: sigma must be positive");
    return std::exp(-sigma * dt);
}

double base_intensity(const ModelParams& p, int user, int item) {
    return p.theta_u.at(static_cast<std::size_t>(user)) * p.theta_o.at(static_cast<std::size_t>(item));
}

double social_intensity(const ModelParams& p, int target_user, const Precursors& pre) {
    const double beta = p.beta_u.at(static_cast<std::size_t>(target_user));
    double sum = 0.0;
    for (const Precursors::Entry& e : pre.entries) {
        sum += p.alpha_u.at(static_cast<std::size_t>(e.user)) * decay(e.dt, p.sigma);
    }
    return beta * sum;
}

double self_exciting_intensity(const ModelParams& p, int target_user, const Precursors& own) {
    const double ab = p.alpha_u.at(static_cast<std::size_t>(target_user)) *
                      p.beta_u.at(static_cast<std::size_t>(target_user));
    double sum = 0.0;
    for (const Precursors::Entry& e : own.entries) {
        sum += decay(e.dt, p.sigma);
    }
    return ab * sum;
}

double weight_at(const ModelSpec& spec, const ModelParams& p, double t) {
    return p.w.at(static_cast<std::size_t>(bucket_of(spec, static_cast<int>(p.w.size()), t)));
}

double hazard_rate(const ModelSpec& spec, const ModelParams& p, int user, int item, double t,
                   const Precursors& pre) {
    const double base = base_intensity(p, user, item);
    double lam;
    switch (spec.variant) {
        case Variant::PP:
            lam = base;
            break;
        case Variant::HP:
            lam = base + self_exciting_intensity(p, user, pre);
            break;
        case Variant::IB:
            lam = base + social_intensity(p, user, pre);
            break;
        case Variant::CC:
            lam = base * std::exp(std::min(weight_at(spec, p, t) * social_intensity(p, user, pre),
                                           kMaxCoxExponent));
            break;
        case Variant::MHMl:
            lam = base * p.kappa_u.at(static_cast<std::size_t>(user)) + social_intensity(p, user, pre);
            break;
        case Variant::MHMe:
            lam = base * p.kappa_u.at(static_cast<std::size_t>(user)) *
                  std::exp(std::min(weight_at(spec, p, t) * social_intensity(p, user, pre),
                                    kMaxCoxExponent));
            break;
        default:
            lam = base;
    }
    if (!std::isfinite(lam)) {
        throw NumericError(std::string("non-finite hazard (variant ") + variant_name(spec.variant) +
                           ", user " + std::to_string(user) + ", item " + std::to_string(item) + ")");
    }
    return std::max(lam, kHazardFloor);
}

double cumulative_hazard(const ModelSpec& spec, const ModelParams& p, int user, int item,
                         double anchor, std::span<const PrecursorEvent> stream, double t) {
    if (t < 0.0) throw std::invalid_argument("cumulative_hazard: t must be non-negative");
    Observation o;
    o.user = user;
    o.item = item;
    o.anchor = anchor;
    o.end = anchor + t;
    o.duration = t;
    o.censored = true;
    Scratch sc;
    double cum = 0.0;
    const int n_buckets = static_cast<int>(p.w.empty() ? 1 : p.w.size());
    observation_loglik(p, spec, n_buckets, o, stream, nullptr, sc, &cum);
    return cum;
}

double survival(const ModelSpec& spec, const ModelParams& p, int user, int item, double anchor,
                std::span<const PrecursorEvent> stream, double t) {
    return std::exp(-cumulative_hazard(spec, p, user, item, anchor, stream, t));
}

std::vector<double> survival_curve(const ModelSpec& spec, const ModelParams& p, int user, int item,
                                   double anchor, std::span<const PrecursorEvent> stream, int days) {
    if (days < 0) throw std::invalid_argument("survival_curve: days must be non-negative");
    const Variant v = spec.variant;
    const bool social = has_social(v);
    const bool selfx = is_self_exciting(v);
    const double base = p.theta_u.at(static_cast<std::size_t>(user)) *
                        p.theta_o.at(static_cast<std::size_t>(item)) *
                        (has_price(v) ? p.kappa_u.at(static_cast<std::size_t>(user)) : 1.0);
    const double beta = social ? p.beta_u.at(static_cast<std::size_t>(user)) : 0.0;
    const double day_decay = std::exp(-p.sigma);
    const int n_buckets = static_cast<int>(p.w.empty() ? 1 : p.w.size());

    std::vector<double> curve(static_cast<std::size_t>(days) + 1, 1.0);
    double cum = 0.0;
    double gsum = 0.0;
    std::size_t ptr = 0;
    for (int tau = 1; tau <= days; ++tau) {
        const double s = anchor + tau;
        if (social) {
            gsum *= day_decay;
            while (ptr < stream.size() && stream[ptr].time < s) {
                const double a = selfx ? p.alpha_u[static_cast<std::size_t>(user)]
                                       : p.alpha_u[static_cast<std::size_t>(stream[ptr].user)];
                gsum += a * std::exp(-p.sigma * (s - stream[ptr].time));
                ++ptr;
            }
        }
        double lam;
        if (v == Variant::PP) {
            lam = base;
        } else if (has_weight(v)) {
            const double x = p.w[static_cast<std::size_t>(bucket_of(spec, n_buckets, s))] * beta * gsum;
            lam = base * std::exp(std::min(x, kMaxCoxExponent));
        } else {
            lam = base + beta * gsum;
        }
        cum += std::max(lam, kHazardFloor);
        curve[static_cast<std::size_t>(tau)] = std::exp(-cum);
    }
    return curve;
}

double bid_logpdf(double price, int shape, double kappa) {
    if (!(price > 0.0)) throw std::domain_error("bid_logpdf: price must lie in the positive support");
    if (shape < 1) throw std::invalid_argument("bid_logpdf: shape must be a positive integer");
    if (!(kappa > 0.0)) throw std::invalid_argument("bid_logpdf: kappa must be positive");
    double ll = shape * std::log(kappa) - kappa * price - std::lgamma(static_cast<double>(shape));
    if (shape > 1) ll += (shape - 1) * std::log(price);
    return ll;
}

double total_log_likelihood(const ModelParams& p, const ObservationSet& obs) {
    return likelihood_impl(p, obs, nullptr);
}

double total_log_likelihood_grad(const ModelParams& p, const ObservationSet& obs, ParamGrad& grad) {
    grad.resize_like(p);
    return likelihood_impl(p, obs, &grad);
}

} // namespace mhm
