#pragma once

#include "mhm/hazard.hpp"
#include "mhm/types.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mhm {

// ---- coordinate transforms ------------------------------------------

enum class TransformKind { Log, Logit, Identity };

// Per-coordinate map between the parameter's natural support and the
// unconstrained space the Gaussian variational family lives in.
// Logit is scaled: x in (0, scale) maps to logit(x / scale).
struct TransformSpec {
    TransformKind kind = TransformKind::Identity;
    double scale = 1.0;
};

double to_unconstrained(const TransformSpec& t, double x);
double to_constrained(const TransformSpec& t, double z);
// log |d T^-1 / dz| and its derivative in z (diagonal Jacobian).
double log_det_jacobian(const TransformSpec& t, double z);
double dconstrained_dz(const TransformSpec& t, double z);
double dlogdet_dz(const TransformSpec& t, double z);

// ---- generic differentiable target ----------------------------------

// A log-density over a flat constrained parameter vector. Both the hazard
// model and the test-only toy posteriors implement this.
class Target {
public:
    virtual ~Target() = default;
    virtual std::size_t dim() const = 0;
    virtual const std::vector<TransformSpec>& transforms() const = 0;
    virtual double log_density(std::span<const double> x) const = 0;
    // Returns the value; writes d(log density)/dx into grad (dim-sized).
    virtual double log_density_grad(std::span<const double> x, std::span<double> grad) const = 0;
};

// Mean-field Gaussian over the unconstrained coordinates.
struct VariationalState {
    std::vector<double> mu;
    std::vector<double> log_std;
};

struct FitConfig {
    int iterations = 3000;
    double learning_rate = 0.1; // Adagrad base step
    int mc_samples = 1;
    std::uint64_t seed = 0;
    double tolerance = 1e-3; // on the 100-step moving average of the ELBO
    int trace_every = 10;

    // prior hyperparameters
    double kappa_prior_shape = 2.0; // a0
    double kappa_prior_rate = 0.0;  // b0; 0 selects the data-scaled default
    double w_step_std = 0.1;        // Gaussian random-walk step stddev
    double theta_bound = 100.0;     // U for the uniform prior on theta
    double ab_bound = 10.0;         // U for alpha and beta
    double sigma_bound = 2.0;       // U for sigma when it is learned
    double sigma_init = 0.1;        // decay rate; held fixed unless learn_sigma
    bool learn_sigma = false;
};

// ---- ADVI core -------------------------------------------------------

// Monte Carlo ELBO at fixed standard-normal noise (mc_samples * dim
// values); deterministic for fixed noise.
double elbo_estimate(const Target& target, const VariationalState& q, std::span<const double> noise,
                     int mc_samples);

// Analytic reparameterized gradient at the same fixed noise. Returns the
// ELBO estimate; grad must be dim-sized in both fields.
double elbo_gradient(const Target& target, const VariationalState& q, std::span<const double> noise,
                     int mc_samples, VariationalState& grad);

struct AdviResult {
    VariationalState q;
    std::vector<std::pair<int, double>> trace; // (step, ELBO)
    std::vector<double> point; // untransformed variational means
};

AdviResult run_advi(const Target& target, const FitConfig& config,
                    std::span<const double> init_constrained);

// Maximizes log_density(T^-1(z)) directly (no entropy, no Jacobian term);
// the optimum is the constrained-space posterior mode.
std::vector<double> run_map(const Target& target, const FitConfig& config,
                            std::span<const double> init_constrained);

// ---- hazard-model target --------------------------------------------

enum class ParamKind { ThetaU, ThetaO, KappaU, AlphaU, BetaU, W, Sigma };

struct ParamBlock {
    ParamKind kind;
    std::size_t offset;
    std::size_t count;
};

// Flat layout over the parameters a variant actually uses.
struct ParamLayout {
    std::vector<ParamBlock> blocks;
    std::size_t total = 0;
};

ParamLayout make_layout(const ModelSpec& spec, int n_users, int n_items, int n_buckets,
                        bool learn_sigma);

// log p(params, data): censored likelihood plus the kappa Gamma prior,
// the w random-walk prior, and the uniform-prior constants.
class HazardTarget : public Target {
public:
    HazardTarget(const ModelSpec& spec, const EventLog& train, const FitConfig& config);

    std::size_t dim() const override { return layout_.total; }
    const std::vector<TransformSpec>& transforms() const override { return transforms_; }
    double log_density(std::span<const double> x) const override;
    double log_density_grad(std::span<const double> x, std::span<double> grad) const override;

    const ObservationSet& observations() const { return obs_; }
    const ParamLayout& layout() const { return layout_; }
    double kappa_prior_rate() const { return b0_; }

    ModelParams unpack(std::span<const double> x) const;
    std::vector<double> pack(const ModelParams& p) const;
    // Data-driven starting point in constrained space.
    std::vector<double> initial_point() const;

private:
    double log_prior(const ModelParams& p, ParamGrad* grad) const;

    ModelSpec spec_;
    FitConfig config_;
    ObservationSet obs_;
    ParamLayout layout_;
    std::vector<TransformSpec> transforms_;
    double b0_ = 1.0;
    double fixed_sigma_ = 0.1;
    std::vector<double> init_;
    mutable ModelParams scratch_params_;
    mutable ParamGrad scratch_grad_;
};

// ---- fitting entry points -------------------------------------------

struct FitResult {
    ModelParams params; // untransformed variational means
    VariationalState q;
    std::vector<std::pair<int, double>> trace;
};

FitResult fit(const ModelSpec& spec, const EventLog& train, const FitConfig& config);
ModelParams map_fit(const ModelSpec& spec, const EventLog& train, const FitConfig& config);

} // namespace mhm
