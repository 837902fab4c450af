#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mhm/errors.hpp"
#include "mhm/infer.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace mhm;

namespace {

// Conjugate toy: x_i ~ Exponential(kappa) with a Gamma(a0, b0) prior on
// kappa. Posterior is Gamma(a0 + n, b0 + sum x) in closed form.
class ExponentialGammaTarget : public Target {
public:
    ExponentialGammaTarget(std::vector<double> data, double a0, double b0)
        : data_(std::move(data)), a0_(a0), b0_(b0) {
        transforms_ = {{TransformKind::Log, 1.0}};
        for (double x : data_) sum_ += x;
    }

    std::size_t dim() const override { return 1; }
    const std::vector<TransformSpec>& transforms() const override { return transforms_; }

    double log_density(std::span<const double> x) const override {
        const double k = x[0];
        return (a0_ - 1.0) * std::log(k) - b0_ * k +
               static_cast<double>(data_.size()) * std::log(k) - k * sum_;
    }

    double log_density_grad(std::span<const double> x, std::span<double> grad) const override {
        const double k = x[0];
        grad[0] = (a0_ - 1.0 + static_cast<double>(data_.size())) / k - b0_ - sum_;
        return log_density(x);
    }

    double post_shape() const { return a0_ + static_cast<double>(data_.size()); }
    double post_rate() const { return b0_ + sum_; }

private:
    std::vector<double> data_;
    double a0_, b0_;
    double sum_ = 0.0;
    std::vector<TransformSpec> transforms_;
};

std::vector<double> quantile_exponential_data(double kappa, int n) {
    // deterministic plug-in sample at the mid-quantiles of Exp(kappa)
    std::vector<double> x;
    for (int i = 0; i < n; ++i) x.push_back(-std::log(1.0 - (i + 0.5) / n) / kappa);
    return x;
}

EventLog small_log() {
    std::vector<PurchaseEvent> ev = {
        {0, 0, 1.2, 3.0}, {1, 0, 2.5, 1.5}, {0, 1, 4.0, 2.0}, {0, 0, 7.8, 2.5}};
    return EventLog(std::move(ev), 10.0, 2, 2);
}

} // namespace

TEST_CASE("transforms round-trip and their Jacobians match finite differences") {
    const TransformSpec specs[] = {{TransformKind::Log, 1.0},
                                   {TransformKind::Logit, 100.0},
                                   {TransformKind::Logit, 2.0},
                                   {TransformKind::Identity, 1.0}};
    const double h = 1e-6;
    for (const TransformSpec& t : specs) {
        for (const double z : {-3.0, -0.4, 0.0, 1.7}) {
            const double x = to_constrained(t, z);
            CHECK(to_unconstrained(t, x) == doctest::Approx(z).epsilon(1e-10));
            const double fd_dx = (to_constrained(t, z + h) - to_constrained(t, z - h)) / (2 * h);
            CHECK(dconstrained_dz(t, z) == doctest::Approx(fd_dx).epsilon(1e-6));
            CHECK(log_det_jacobian(t, z) ==
                  doctest::Approx(std::log(std::abs(dconstrained_dz(t, z)))).epsilon(1e-10));
            const double fd_ld =
                (log_det_jacobian(t, z + h) - log_det_jacobian(t, z - h)) / (2 * h);
            CHECK(dlogdet_dz(t, z) == doctest::Approx(fd_ld).epsilon(1e-6));
        }
    }
    CHECK_THROWS_AS(to_unconstrained({TransformKind::Log, 1.0}, -1.0), std::domain_error);
    CHECK_THROWS_AS(to_unconstrained({TransformKind::Logit, 2.0}, 2.5), std::domain_error);
}

TEST_CASE("ELBO estimate equals the hand-computed value on a 1-d Gaussian target") {
    // target: standard normal over an Identity coordinate
    class Gauss : public Target {
    public:
        Gauss() : tf_{{TransformKind::Identity, 1.0}} {}
        std::size_t dim() const override { return 1; }
        const std::vector<TransformSpec>& transforms() const override { return tf_; }
        double log_density(std::span<const double> x) const override {
            return -0.5 * x[0] * x[0] - 0.9189385332046727;
        }
        double log_density_grad(std::span<const double> x, std::span<double> g) const override {
            g[0] = -x[0];
            return log_density(x);
        }

    private:
        std::vector<TransformSpec> tf_;
    } target;
    VariationalState q{{0.5}, {std::log(0.8)}};
    const std::vector<double> noise = {0.3};
    // z = 0.5 + 0.8*0.3; elbo = logN(z) + (log_std + 0.5 ln 2 pi e)
    const double z = 0.5 + 0.8 * 0.3;
    const double expected =
        -0.5 * z * z - 0.9189385332046727 + std::log(0.8) + 1.4189385332046727;
    CHECK(elbo_estimate(target, q, noise, 1) == doctest::Approx(expected).epsilon(1e-12));

    VariationalState grad;
    CHECK(elbo_gradient(target, q, noise, 1, grad) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(grad.mu[0] == doctest::Approx(-z).epsilon(1e-12));
    CHECK(grad.log_std[0] == doctest::Approx(-z * 0.8 * 0.3 + 1.0).epsilon(1e-12));
}

TEST_CASE("ELBO gradient matches finite differences at fixed noise") {
    const EventLog log = small_log();
    ModelSpec spec;
    spec.variant = Variant::MHMl;
    FitConfig config;
    const HazardTarget target(spec, log, config);
    const std::size_t dim = target.dim();

    VariationalState q;
    const std::vector<TransformSpec>& tf = target.transforms();
    const std::vector<double> init = target.initial_point();
    q.mu.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) q.mu[k] = to_unconstrained(tf[k], init[k]);
    q.log_std.assign(dim, -1.3);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(dim);
    for (double& n : noise) n = normal(rng);

    VariationalState grad;
    elbo_gradient(target, q, noise, 1, grad);
    const double h = 1e-6;
    for (std::size_t k = 0; k < dim; ++k) {
        VariationalState qp = q;
        qp.mu[k] += h;
        VariationalState qm = q;
        qm.mu[k] -= h;
        const double fd = (elbo_estimate(target, qp, noise, 1) -
                           elbo_estimate(target, qm, noise, 1)) / (2 * h);
        CHECK(grad.mu[k] == doctest::Approx(fd).epsilon(1e-4));

        qp = q;
        qp.log_std[k] += h;
        qm = q;
        qm.log_std[k] -= h;
        const double fd_s = (elbo_estimate(target, qp, noise, 1) -
                             elbo_estimate(target, qm, noise, 1)) / (2 * h);
        CHECK(grad.log_std[k] == doctest::Approx(fd_s).epsilon(1e-4));
    }
}

TEST_CASE("conjugate toy: ADVI recovers the closed-form posterior mean within 5%") {
    const ExponentialGammaTarget target(quantile_exponential_data(0.8, 60), 2.0, 2.0);
    const double post_mean = target.post_shape() / target.post_rate();

    FitConfig config;
    config.iterations = 4000;
    config.learning_rate = 0.05;
    config.seed = 3;
    config.tolerance = -1e300; // never stop early
    const AdviResult result = run_advi(target, config, std::vector<double>{0.3});
    // variational mean of kappa under the log transform: exp(mu + s^2/2)
    const double s = std::exp(result.q.log_std[0]);
    const double q_mean = std::exp(result.q.mu[0] + 0.5 * s * s);
    CHECK(q_mean == doctest::Approx(post_mean).epsilon(0.05));
    CHECK_FALSE(result.trace.empty());
}

TEST_CASE("conjugate toy: MAP mode matches (a_n - 1) / b_n closely") {
    const ExponentialGammaTarget target(quantile_exponential_data(1.3, 80), 2.0, 2.0);
    const double mode = (target.post_shape() - 1.0) / target.post_rate();
    FitConfig config;
    config.iterations = 6000;
    config.learning_rate = 0.05;
    config.tolerance = -1e300;
    const std::vector<double> point = run_map(target, config, std::vector<double>{0.4});
    CHECK(point[0] == doctest::Approx(mode).epsilon(1e-3));
}

TEST_CASE("ADVI is deterministic for a fixed seed") {
    const ExponentialGammaTarget target(quantile_exponential_data(0.8, 40), 2.0, 2.0);
    FitConfig config;
    config.iterations = 500;
    config.seed = 17;
    const AdviResult a = run_advi(target, config, std::vector<double>{0.3});
    const AdviResult b = run_advi(target, config, std::vector<double>{0.3});
    CHECK(a.q.mu == b.q.mu);
    CHECK(a.q.log_std == b.q.log_std);
    CHECK(a.trace == b.trace);
}

TEST_CASE("layout includes only the parameters the variant uses") {
    ModelSpec spec;
    spec.variant = Variant::PP;
    ParamLayout layout = make_layout(spec, 3, 2, 5, false);
    CHECK(layout.total == 5); // theta_u + theta_o only
    REQUIRE(layout.blocks.size() == 2);

    spec.variant = Variant::MHMe;
    layout = make_layout(spec, 3, 2, 5, false);
    CHECK(layout.total == 3 + 2 + 3 + 3 + 3 + 5);

    spec.variant = Variant::IB;
    layout = make_layout(spec, 3, 2, 5, true);
    CHECK(layout.blocks.back().kind == ParamKind::Sigma);
    CHECK(layout.total == 3 + 2 + 3 + 3 + 1);
}

TEST_CASE("HazardTarget pack/unpack round-trips and fixes sigma by default") {
    const EventLog log = small_log();
    ModelSpec spec;
    spec.variant = Variant::MHMe;
    FitConfig config;
    config.sigma_init = 0.17;
    const HazardTarget target(spec, log, config);
    const std::vector<double> x = target.initial_point();
    const ModelParams p = target.unpack(x);
    CHECK(p.sigma == doctest::Approx(0.17));
    const std::vector<double> x2 = target.pack(p);
    REQUIRE(x2.size() == x.size());
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(x2[k] == doctest::Approx(x[k]).epsilon(1e-12));
}

TEST_CASE("HazardTarget log-density gradient matches finite differences for all variants") {
    const EventLog log = small_log();
    const double h = 1e-6;
    for (const Variant v : {Variant::PP, Variant::HP, Variant::IB, Variant::CC, Variant::MHMl,
                            Variant::MHMe}) {
        CAPTURE(variant_name(v));
        ModelSpec spec;
        spec.variant = v;
        FitConfig config;
        config.learn_sigma = true;
        const HazardTarget target(spec, log, config);
        std::vector<double> x = target.initial_point();
        std::vector<double> grad(x.size());
        target.log_density_grad(x, grad);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double keep = x[k];
            x[k] = keep + h;
            const double up = target.log_density(x);
            x[k] = keep - h;
            const double dn = target.log_density(x);
            x[k] = keep;
            CHECK(grad[k] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
        }
    }
}

TEST_CASE("data-scaled kappa prior rate is a0 times the mean inverse average bid") {
    const EventLog log = small_log();
    ModelSpec spec;
    spec.variant = Variant::MHMe;
    FitConfig config;
    const HazardTarget target(spec, log, config);
    // user 0: 3 bids totalling 7.5 -> 3/7.5; user 1: 1 bid of 1.5 -> 1/1.5
    const double expected = 2.0 * 0.5 * (3.0 / 7.5 + 1.0 / 1.5);
    CHECK(target.kappa_prior_rate() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("divergent objective raises FitDivergedError with a trace") {
    class Bad : public Target {
    public:
        Bad() : tf_{{TransformKind::Identity, 1.0}} {}
        std::size_t dim() const override { return 1; }
        const std::vector<TransformSpec>& transforms() const override { return tf_; }
        double log_density(std::span<const double>) const override {
            throw NumericError("always bad");
        }
        double log_density_grad(std::span<const double>, std::span<double>) const override {
            throw NumericError("always bad");
        }

    private:
        std::vector<TransformSpec> tf_;
    } target;
    FitConfig config;
    config.iterations = 10;
    CHECK_THROWS_AS(run_advi(target, config, std::vector<double>{0.0}), FitDivergedError);
}

TEST_CASE("fit on the small log produces usable parameters for every variant") {
    const EventLog log = small_log();
    for (const Variant v : {Variant::PP, Variant::MHMe}) {
        ModelSpec spec;
        spec.variant = v;
        FitConfig config;
        config.iterations = 300;
        config.seed = 5;
        const FitResult result = fit(spec, log, config);
        REQUIRE(result.params.theta_u.size() == 2);
        for (double t : result.params.theta_u) CHECK(t > 0.0);
        CHECK_FALSE(result.trace.empty());
        // the ELBO trace should improve overall
        CHECK(result.trace.back().second > result.trace.front().second);
    }
}
