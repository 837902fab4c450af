#include "mhm/infer.hpp"

#include "mhm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mhm {

namespace {

constexpr double kAdagradDelta = 1e-8;
constexpr double kHalfLog2PiE = 1.4189385332046727; // 0.5 * ln(2*pi*e)
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // ln(sqrt(2*pi))

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) {
    if (z > 30.0) return z;
    return std::log1p(std::exp(z));
}

} // namespace

double to_unconstrained(const TransformSpec& t, double x) {
    switch (t.kind) {
        case TransformKind::Log:
            if (!(x > 0.0)) throw std::domain_error("transform: value outside (0, inf)");
            return std::log(x);
        case TransformKind::Logit: {
            if (!(x > 0.0) || !(x < t.scale)) {
                throw std::domain_error("transform: value outside (0, U)");
            }
            const double r = x / t.scale;
            return std::log(r / (1.0 - r));
        }
        case TransformKind::Identity:
            return x;
    }
    return x;
}

double to_constrained(const TransformSpec& t, double z) {
    switch (t.kind) {
        case TransformKind::Log:
            return std::exp(z);
        case TransformKind::Logit:
            return t.scale * sigmoid(z);
        case TransformKind::Identity:
            return z;
    }
    return z;
}

double log_det_jacobian(const TransformSpec& t, double z) {
    switch (t.kind) {
        case TransformKind::Log:
            return z;
        case TransformKind::Logit:
            return std::log(t.scale) - softplus(-z) - softplus(z);
        case TransformKind::Identity:
            return 0.0;
    }
    return 0.0;
}

double dconstrained_dz(const TransformSpec& t, double z) {
    switch (t.kind) {
        case TransformKind::Log:
            return std::exp(z);
        case TransformKind::Logit: {
            const double s = sigmoid(z);
            return t.scale * s * (1.0 - s);
        }
        case TransformKind::Identity:
            return 1.0;
    }
    return 1.0;
}

double dlogdet_dz(const TransformSpec& t, double z) {
    switch (t.kind) {
        case TransformKind::Log:
            return 1.0;
        case TransformKind::Logit:
            return 1.0 - 2.0 * sigmoid(z);
        case TransformKind::Identity:
            return 0.0;
    }
    return 0.0;
}

double elbo_estimate(const Target& target, const VariationalState& q, std::span<const double> noise,
                     int mc_samples) {
    const std::size_t dim = target.dim();
    if (q.mu.size() != dim || q.log_std.size() != dim) {
        throw std::invalid_argument("elbo_estimate: state size mismatch");
    }
    if (mc_samples < 1 || noise.size() != dim * static_cast<std::size_t>(mc_samples)) {
        throw std::invalid_argument("elbo_estimate: need one noise draw per parameter per sample");
    }
    const std::vector<TransformSpec>& tf = target.transforms();
    std::vector<double> x(dim);
    double acc = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
        double logdet = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double z = q.mu[k] + std::exp(q.log_std[k]) * noise[static_cast<std::size_t>(s) * dim + k];
            x[k] = to_constrained(tf[k], z);
            logdet += log_det_jacobian(tf[k], z);
        }
        acc += target.log_density(x) + logdet;
    }
    double entropy = 0.0;
    for (std::size_t k = 0; k < dim; ++k) entropy += q.log_std[k] + kHalfLog2PiE;
    return acc / mc_samples + entropy;
}

double elbo_gradient(const Target& target, const VariationalState& q, std::span<const double> noise,
                     int mc_samples, VariationalState& grad) {
    const std::size_t dim = target.dim();
    grad.mu.assign(dim, 0.0);
    grad.log_std.assign(dim, 0.0);
    const std::vector<TransformSpec>& tf = target.transforms();
    std::vector<double> x(dim);
    std::vector<double> z(dim);
    std::vector<double> gx(dim);
    double acc = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
        double logdet = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            z[k] = q.mu[k] + std::exp(q.log_std[k]) * noise[static_cast<std::size_t>(s) * dim + k];
            x[k] = to_constrained(tf[k], z[k]);
            logdet += log_det_jacobian(tf[k], z[k]);
        }
        acc += target.log_density_grad(x, gx) + logdet;
        for (std::size_t k = 0; k < dim; ++k) {
            const double gz = gx[k] * dconstrained_dz(tf[k], z[k]) + dlogdet_dz(tf[k], z[k]);
            grad.mu[k] += gz / mc_samples;
            grad.log_std[k] += gz * std::exp(q.log_std[k]) *
                               noise[static_cast<std::size_t>(s) * dim + k] / mc_samples;
        }
    }
    double entropy = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        grad.log_std[k] += 1.0;
        entropy += q.log_std[k] + kHalfLog2PiE;
    }
    return acc / mc_samples + entropy;
}

namespace {

// Shared Adagrad loop; `eval` fills the gradient and returns the
// objective, or NaN when the draw was numerically unusable.
template <typename Eval>
std::vector<std::pair<int, double>> adagrad_ascent(std::vector<double>& params, const FitConfig& config,
                                                   Eval&& eval, std::vector<double>& grad) {
    std::vector<double> accum(params.size(), 0.0);
    std::vector<std::pair<int, double>> trace;
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(config.iterations));
    int nonfinite_streak = 0;
    for (int step = 0; step < config.iterations; ++step) {
        const double value = eval(step, params, grad);
        if (!std::isfinite(value)) {
            if (++nonfinite_streak >= 3) {
                throw FitDivergedError("fit diverged: non-finite objective on 3 consecutive steps",
                                       trace);
            }
            continue;
        }
        nonfinite_streak = 0;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double g = grad[k];
            accum[k] += g * g;
            params[k] += config.learning_rate * g / std::sqrt(accum[k] + kAdagradDelta);
        }
        if (step % config.trace_every == 0) trace.emplace_back(step, value);
        history.push_back(value);
        if (history.size() >= 200 && step % 50 == 0) {
            const std::size_t n = history.size();
            const double recent = std::accumulate(history.end() - 100, history.end(), 0.0) / 100.0;
            const double before =
                std::accumulate(history.end() - 200, history.end() - 100, 0.0) / 100.0;
            (void)n;
            if (recent - before < config.tolerance) break;
        }
    }
    return trace;
}

} // namespace

AdviResult run_advi(const Target& target, const FitConfig& config,
                    std::span<const double> init_constrained) {
    const std::size_t dim = target.dim();
    if (init_constrained.size() != dim) {
        throw std::invalid_argument("run_advi: initial point size mismatch");
    }
    const std::vector<TransformSpec>& tf = target.transforms();

    VariationalState q;
    q.mu.resize(dim);
    q.log_std.assign(dim, -2.0);
    for (std::size_t k = 0; k < dim; ++k) q.mu[k] = to_unconstrained(tf[k], init_constrained[k]);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(dim * static_cast<std::size_t>(config.mc_samples));
    VariationalState vgrad;

    // flatten (mu, log_std) into one vector for the shared optimizer loop
    std::vector<double> flat(2 * dim);
    std::copy(q.mu.begin(), q.mu.end(), flat.begin());
    std::copy(q.log_std.begin(), q.log_std.end(), flat.begin() + static_cast<std::ptrdiff_t>(dim));
    std::vector<double> grad(2 * dim);

    auto eval = [&](int /*step*/, const std::vector<double>& point, std::vector<double>& g) -> double {
        std::copy(point.begin(), point.begin() + static_cast<std::ptrdiff_t>(dim), q.mu.begin());
        std::copy(point.begin() + static_cast<std::ptrdiff_t>(dim), point.end(), q.log_std.begin());
        for (double& n : noise) n = normal(rng);
        double value;
        try {
            value = elbo_gradient(target, q, noise, config.mc_samples, vgrad);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        std::copy(vgrad.mu.begin(), vgrad.mu.end(), g.begin());
        std::copy(vgrad.log_std.begin(), vgrad.log_std.end(), g.begin() + static_cast<std::ptrdiff_t>(dim));
        return value;
    };

    AdviResult result;
    result.trace = adagrad_ascent(flat, config, eval, grad);
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(dim), q.mu.begin());
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(dim), flat.end(), q.log_std.begin());
    result.q = q;
    result.point.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) result.point[k] = to_constrained(tf[k], q.mu[k]);
    return result;
}

std::vector<double> run_map(const Target& target, const FitConfig& config,
                            std::span<const double> init_constrained) {
    const std::size_t dim = target.dim();
    if (init_constrained.size() != dim) {
        throw std::invalid_argument("run_map: initial point size mismatch");
    }
    const std::vector<TransformSpec>& tf = target.transforms();
    std::vector<double> z(dim);
    for (std::size_t k = 0; k < dim; ++k) z[k] = to_unconstrained(tf[k], init_constrained[k]);

    std::vector<double> x(dim);
    std::vector<double> gx(dim);
    std::vector<double> grad(dim);
    auto eval = [&](int /*step*/, const std::vector<double>& point, std::vector<double>& g) -> double {
        for (std::size_t k = 0; k < dim; ++k) x[k] = to_constrained(tf[k], point[k]);
        double value;
        try {
            value = target.log_density_grad(x, gx);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        for (std::size_t k = 0; k < dim; ++k) g[k] = gx[k] * dconstrained_dz(tf[k], point[k]);
        return value;
    };
    adagrad_ascent(z, config, eval, grad);

    std::vector<double> out(dim);
    for (std::size_t k = 0; k < dim; ++k) out[k] = to_constrained(tf[k], z[k]);
    return out;
}

// ---- hazard-model target --------------------------------------------

ParamLayout make_layout(const ModelSpec& spec, int n_users, int n_items, int n_buckets,
                        bool learn_sigma) {
    ParamLayout layout;
    const auto add = [&](ParamKind kind, std::size_t count) {
        layout.blocks.push_back({kind, layout.total, count});
        layout.total += count;
    };
    const std::size_t m = static_cast<std::size_t>(n_users);
    add(ParamKind::ThetaU, m);
    add(ParamKind::ThetaO, static_cast<std::size_t>(n_items));
    if (has_price(spec.variant)) add(ParamKind::KappaU, m);
    if (has_social(spec.variant)) {
        add(ParamKind::AlphaU, m);
        add(ParamKind::BetaU, m);
    }
    if (has_weight(spec.variant)) add(ParamKind::W, static_cast<std::size_t>(n_buckets));
    if (learn_sigma && has_social(spec.variant)) add(ParamKind::Sigma, 1);
    return layout;
}

HazardTarget::HazardTarget(const ModelSpec& spec, const EventLog& train, const FitConfig& config)
    : spec_(spec), config_(config) {
    if (train.empty()) throw EmptyDatasetError("HazardTarget: training log is empty");
    obs_ = build_observations(spec, train);
    layout_ = make_layout(spec, train.n_users(), train.n_items(), obs_.n_buckets, config.learn_sigma);
    fixed_sigma_ = config.sigma_init;

    transforms_.reserve(layout_.total);
    for (const ParamBlock& b : layout_.blocks) {
        TransformSpec t;
        switch (b.kind) {
            case ParamKind::KappaU: t = {TransformKind::Log, 1.0}; break;
            case ParamKind::ThetaU:
            case ParamKind::ThetaO: t = {TransformKind::Logit, config.theta_bound}; break;
            case ParamKind::AlphaU:
            case ParamKind::BetaU: t = {TransformKind::Logit, config.ab_bound}; break;
            case ParamKind::W: t = {TransformKind::Identity, 1.0}; break;
            case ParamKind::Sigma: t = {TransformKind::Logit, config.sigma_bound}; break;
        }
        transforms_.insert(transforms_.end(), b.count, t);
    }

    // data-scaled default for the kappa prior rate: b0 = a0 * mean_u(1/pbar_u)
    b0_ = config.kappa_prior_rate;
    if (b0_ <= 0.0) {
        double inv_mean_sum = 0.0;
        int n = 0;
        for (int u = 0; u < train.n_users(); ++u) {
            const std::vector<int>& idx = train.events_of_user(u);
            if (idx.empty()) continue;
            double total = 0.0;
            for (int i : idx) total += train.events()[static_cast<std::size_t>(i)].price;
            if (total > 0.0) {
                inv_mean_sum += static_cast<double>(idx.size()) / total;
                ++n;
            }
        }
        b0_ = n > 0 ? config_.kappa_prior_shape * inv_mean_sum / n : 1.0;
    }

    // ---- data-driven starting point ----
    const double t_end = std::max(train.t_end(), 1.0);
    std::vector<double> kappa_init(static_cast<std::size_t>(train.n_users()),
                                   config_.kappa_prior_shape / b0_);
    std::vector<double> shapes(static_cast<std::size_t>(train.n_users()), 0.0);
    std::vector<double> spend(static_cast<std::size_t>(train.n_users()), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(train.n_users()), 0);
    for (const Observation& o : obs_.observations) {
        if (o.censored) continue;
        shapes[static_cast<std::size_t>(o.user)] += o.bid_shape;
        spend[static_cast<std::size_t>(o.user)] += o.price;
        ++counts[static_cast<std::size_t>(o.user)];
    }
    double kappa_mean = 0.0;
    int kappa_n = 0;
    for (std::size_t u = 0; u < kappa_init.size(); ++u) {
        if (spend[u] > 0.0) kappa_init[u] = shapes[u] / spend[u];
        if (counts[u] > 0) {
            kappa_mean += kappa_init[u];
            ++kappa_n;
        }
    }
    kappa_mean = kappa_n > 0 ? kappa_mean / kappa_n : 1.0;
    const bool price = has_price(spec.variant);
    const double kap_eff = price ? kappa_mean : 1.0;

    double rate_mean = 0.0;
    for (std::size_t u = 0; u < counts.size(); ++u) rate_mean += counts[u] / t_end;
    rate_mean = std::max(rate_mean / std::max(train.n_users(), 1), 1e-6);
    const double theta_o_init =
        std::clamp(std::sqrt(rate_mean / kap_eff), 1e-4, 0.5 * config_.theta_bound);

    const auto clamp_bounded = [](double v, double bound) {
        return std::clamp(v, 1e-5 * bound, (1.0 - 1e-5) * bound);
    };
    init_.assign(layout_.total, 0.0);
    for (const ParamBlock& b : layout_.blocks) {
        for (std::size_t i = 0; i < b.count; ++i) {
            double v = 0.0;
            switch (b.kind) {
                case ParamKind::ThetaU: {
                    const double r = counts[i] / t_end;
                    const double kap_u = price ? kappa_init[i] : 1.0;
                    v = clamp_bounded(std::max(r, 0.2 * rate_mean) / (theta_o_init * kap_u),
                                      config_.theta_bound);
                    break;
                }
                case ParamKind::ThetaO:
                    v = clamp_bounded(theta_o_init, config_.theta_bound);
                    break;
                case ParamKind::KappaU:
                    v = std::max(kappa_init[i], 1e-8);
                    break;
                case ParamKind::AlphaU:
                case ParamKind::BetaU:
                    v = clamp_bounded(0.05, config_.ab_bound);
                    break;
                case ParamKind::W:
                    v = 0.01;
                    break;
                case ParamKind::Sigma:
                    v = clamp_bounded(config_.sigma_init, config_.sigma_bound);
                    break;
            }
            init_[b.offset + i] = v;
        }
    }
}

ModelParams HazardTarget::unpack(std::span<const double> x) const {
    ModelParams p;
    p.theta_u.assign(static_cast<std::size_t>(obs_.n_users), 0.0);
    p.theta_o.assign(static_cast<std::size_t>(obs_.n_items), 0.0);
    p.kappa_u.assign(static_cast<std::size_t>(obs_.n_users), 1.0);
    p.alpha_u.assign(static_cast<std::size_t>(obs_.n_users), 0.0);
    p.beta_u.assign(static_cast<std::size_t>(obs_.n_users), 0.0);
    p.w.assign(static_cast<std::size_t>(obs_.n_buckets), 0.0);
    p.sigma = fixed_sigma_;
    for (const ParamBlock& b : layout_.blocks) {
        double* dst = nullptr;
        switch (b.kind) {
            case ParamKind::ThetaU: dst = p.theta_u.data(); break;
            case ParamKind::ThetaO: dst = p.theta_o.data(); break;
            case ParamKind::KappaU: dst = p.kappa_u.data(); break;
            case ParamKind::AlphaU: dst = p.alpha_u.data(); break;
            case ParamKind::BetaU: dst = p.beta_u.data(); break;
            case ParamKind::W: dst = p.w.data(); break;
            case ParamKind::Sigma: p.sigma = x[b.offset]; continue;
        }
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(b.offset),
                  x.begin() + static_cast<std::ptrdiff_t>(b.offset + b.count), dst);
    }
    return p;
}

std::vector<double> HazardTarget::pack(const ModelParams& p) const {
    std::vector<double> x(layout_.total, 0.0);
    for (const ParamBlock& b : layout_.blocks) {
        const double* src = nullptr;
        switch (b.kind) {
            case ParamKind::ThetaU: src = p.theta_u.data(); break;
            case ParamKind::ThetaO: src = p.theta_o.data(); break;
            case ParamKind::KappaU: src = p.kappa_u.data(); break;
            case ParamKind::AlphaU: src = p.alpha_u.data(); break;
            case ParamKind::BetaU: src = p.beta_u.data(); break;
            case ParamKind::W: src = p.w.data(); break;
            case ParamKind::Sigma: x[b.offset] = p.sigma; continue;
        }
        std::copy(src, src + b.count, x.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    return x;
}

std::vector<double> HazardTarget::initial_point() const { return init_; }

double HazardTarget::log_prior(const ModelParams& p, ParamGrad* grad) const {
    double lp = 0.0;
    const double a0 = config_.kappa_prior_shape;
    const double tau = config_.w_step_std;
    for (const ParamBlock& b : layout_.blocks) {
        switch (b.kind) {
            case ParamKind::KappaU: {
                const double c = a0 * std::log(b0_) - std::lgamma(a0);
                for (std::size_t u = 0; u < b.count; ++u) {
                    const double k = p.kappa_u[u];
                    lp += c + (a0 - 1.0) * std::log(k) - b0_ * k;
                    if (grad != nullptr) grad->kappa_u[u] += (a0 - 1.0) / k - b0_;
                }
                break;
            }
            case ParamKind::W: {
                // Gaussian random walk anchored at zero
                for (std::size_t i = 0; i < b.count; ++i) {
                    const double prev = i == 0 ? 0.0 : p.w[i - 1];
                    const double step = p.w[i] - prev;
                    lp += -0.5 * step * step / (tau * tau) - std::log(tau) - kLogSqrt2Pi;
                    if (grad != nullptr) {
                        grad->w[i] -= step / (tau * tau);
                        if (i > 0) grad->w[i - 1] += step / (tau * tau);
                    }
                }
                break;
            }
            case ParamKind::ThetaU:
            case ParamKind::ThetaO:
                lp -= b.count * std::log(config_.theta_bound);
                break;
            case ParamKind::AlphaU:
            case ParamKind::BetaU:
                lp -= b.count * std::log(config_.ab_bound);
                break;
            case ParamKind::Sigma:
                lp -= std::log(config_.sigma_bound);
                break;
        }
    }
    return lp;
}

double HazardTarget::log_density(std::span<const double> x) const {
    scratch_params_ = unpack(x);
    return total_log_likelihood(scratch_params_, obs_) + log_prior(scratch_params_, nullptr);
}

double HazardTarget::log_density_grad(std::span<const double> x, std::span<double> grad) const {
    scratch_params_ = unpack(x);
    double value = total_log_likelihood_grad(scratch_params_, obs_, scratch_grad_);
    value += log_prior(scratch_params_, &scratch_grad_);
    for (const ParamBlock& b : layout_.blocks) {
        const double* src = nullptr;
        switch (b.kind) {
            case ParamKind::ThetaU: src = scratch_grad_.theta_u.data(); break;
            case ParamKind::ThetaO: src = scratch_grad_.theta_o.data(); break;
            case ParamKind::KappaU: src = scratch_grad_.kappa_u.data(); break;
            case ParamKind::AlphaU: src = scratch_grad_.alpha_u.data(); break;
            case ParamKind::BetaU: src = scratch_grad_.beta_u.data(); break;
            case ParamKind::W: src = scratch_grad_.w.data(); break;
            case ParamKind::Sigma: grad[b.offset] = scratch_grad_.sigma; continue;
        }
        std::copy(src, src + b.count, grad.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    return value;
}

FitResult fit(const ModelSpec& spec, const EventLog& train, const FitConfig& config) {
    HazardTarget target(spec, train, config);
    AdviResult advi = run_advi(target, config, target.initial_point());
    FitResult out;
    out.params = target.unpack(advi.point);
    out.q = std::move(advi.q);
    out.trace = std::move(advi.trace);
    return out;
}

ModelParams map_fit(const ModelSpec& spec, const EventLog& train, const FitConfig& config) {
    HazardTarget target(spec, train, config);
    const std::vector<double> point = run_map(target, config, target.initial_point());
    return target.unpack(point);
}

} // namespace mhm
