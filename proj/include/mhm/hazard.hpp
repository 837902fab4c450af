#pragma once

#include "mhm/types.hpp"

#include <span>
#include <vector>

namespace mhm {

// Intensity is floored here before logs are taken, so degenerate
// parameter draws during optimization cannot produce -inf likelihoods.
inline constexpr double kHazardFloor = 1e-12;

// Cap on the exponent of the Cox link; beyond it the exponential is held
// constant (with zero local gradient) to keep the objective finite.
inline constexpr double kMaxCoxExponent = 60.0;

// A precursor as seen from one target event: the influencing user and the
// positive elapsed time to the target.
struct Precursors {
    struct Entry {
        int user = 0;
        double dt = 0.0;
    };
    std::vector<Entry> entries;
};

// An event from an influence stream, in absolute time. Streams are
// per-item (neighbor influence) or per-user (self-excitation).
struct PrecursorEvent {
    int user = 0;
    double time = 0.0;
};

// One duration observation: the span from a user's previous event (or the
// window start) to either the next event or the window close.
struct Observation {
    int user = 0;
    int item = 0;
    double anchor = 0.0;   // absolute day-offset where the clock restarts
    double end = 0.0;      // absolute day-offset of the event / window close
    double duration = 0.0; // end - anchor
    double price = 0.0;    // uncensored only
    int bid_shape = 1;     // N_u^t clamped at 1, uncensored only
    bool censored = false;
    int prec_lo = 0;       // influence-stream index range [prec_lo, prec_hi)
    int prec_hi = 0;
};

// Observations plus the shared influence streams they index into.
struct ObservationSet {
    ModelSpec spec;
    std::vector<Observation> observations;
    // Indexed by item for neighbor-influence variants, by user for HP.
    std::vector<std::vector<PrecursorEvent>> streams;
    double t_end = 0.0;
    int n_users = 0;
    int n_items = 0;
    int n_buckets = 0;

    std::span<const PrecursorEvent> precursors_of(const Observation& o) const;
};

ObservationSet build_observations(const ModelSpec& spec, const EventLog& log);

// Gradient of a scalar with respect to every constrained parameter.
struct ParamGrad {
    std::vector<double> theta_u, theta_o, kappa_u, alpha_u, beta_u, w;
    double sigma = 0.0;

    void resize_like(const ModelParams& p);
    void zero();
};

// ---- elementary pieces ----------------------------------------------

// e^(-sigma * dt), the influence decay kernel.
double decay(double dt, double sigma);

// theta_u * theta_o
double base_intensity(const ModelParams& p, int user, int item);

// sum over precursors of alpha_{sender} * beta_{target} * decay(dt)
double social_intensity(const ModelParams& p, int target_user, const Precursors& pre);

// Same kernel over the target's own history; both rates are the target's.
double self_exciting_intensity(const ModelParams& p, int target_user, const Precursors& own);

// Value of the covariate weight grid at absolute time t (clamped to the
// last bucket beyond the grid).
double weight_at(const ModelSpec& spec, const ModelParams& p, double t);

// Intensity of the given variant at absolute time t, floored at
// kHazardFloor. `pre` holds neighbor precursors (or own history for HP).
double hazard_rate(const ModelSpec& spec, const ModelParams& p, int user, int item, double t,
                   const Precursors& pre);

// Cumulative hazard on the integer-day grid anchored at `anchor`:
// Lambda(t) = sum_{tau=1..ceil(t)} lambda(anchor + tau), with stream
// events becoming visible once they lie strictly in the past.
double cumulative_hazard(const ModelSpec& spec, const ModelParams& p, int user, int item,
                         double anchor, std::span<const PrecursorEvent> stream, double t);

// exp(-cumulative_hazard(t))
double survival(const ModelSpec& spec, const ModelParams& p, int user, int item, double anchor,
                std::span<const PrecursorEvent> stream, double t);

// S(tau) for tau = 0..days in one forward pass; S(0) = 1.
std::vector<double> survival_curve(const ModelSpec& spec, const ModelParams& p, int user, int item,
                                   double anchor, std::span<const PrecursorEvent> stream, int days);

// log Gamma(shape, kappa) density at `price` (shape = cumulated purchase
// count, kappa = price perception rate).
double bid_logpdf(double price, int shape, double kappa);

// ---- joint likelihood -----------------------------------------------

// Censored-aware log-likelihood of the whole observation set. Price terms
// are included only for variants that model the bid distribution.
double total_log_likelihood(const ModelParams& p, const ObservationSet& obs);

// Same value; also accumulates d(loglik)/d(params) into `grad` (which is
// resized and zeroed here).
double total_log_likelihood_grad(const ModelParams& p, const ObservationSet& obs, ParamGrad& grad);

} // namespace mhm
