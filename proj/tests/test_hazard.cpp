#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mhm/hazard.hpp"
#include "mhm/types.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace mhm;

namespace {

// The shared fixed instance: 2 users, 2 items, 4 events over a 10-day
// window. All frozen expectations below were computed by an independent
// straight-line implementation of the same definitions.
EventLog fixed_log() {
    std::vector<PurchaseEvent> ev = {
        {0, 0, 1.2, 3.0}, {1, 0, 2.5, 1.5}, {0, 1, 4.0, 2.0}, {0, 0, 7.8, 2.5}};
    return EventLog(std::move(ev), 10.0, 2, 2);
}

ModelParams fixed_params(const ModelSpec& spec, double t_end) {
    ModelParams p;
    p.theta_u = {0.9, 1.1};
    p.theta_o = {0.8, 1.2};
    p.kappa_u = {1.5, 0.7};
    p.alpha_u = {0.6, 0.4};
    p.beta_u = {0.5, 0.3};
    p.sigma = 0.25;
    const int nb = weight_bucket_count(spec, t_end);
    p.w.resize(static_cast<std::size_t>(nb));
    for (int b = 0; b < nb; ++b) p.w[static_cast<std::size_t>(b)] = 0.02 * (b + 1);
    return p;
}

// Naive per-day reference for the cumulative hazard: no recurrences, no
// shared state, one full precursor scan per grid day.
double naive_cumulative_hazard(const ModelSpec& spec, const ModelParams& p, int user, int item,
                               double anchor, const std::vector<PrecursorEvent>& stream, double t) {
    const int days = t <= 0.0 ? 0 : static_cast<int>(std::ceil(t - 1e-9));
    double cum = 0.0;
    for (int tau = 1; tau <= days; ++tau) {
        const double s = anchor + tau;
        Precursors pre;
        for (const PrecursorEvent& e : stream) {
            if (e.time < s) pre.entries.push_back({e.user, s - e.time});
        }
        cum += hazard_rate(spec, p, user, item, s, pre);
    }
    return cum;
}

} // namespace

TEST_CASE("decay kernel and its domain") {
    CHECK(decay(2.0, 0.3) == doctest::Approx(std::exp(-0.6)));
    CHECK(decay(0.0, 0.3) == doctest::Approx(1.0));
    CHECK_THROWS_AS(decay(-1.0, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(decay(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("social intensity matches the frozen weighted-decay sum") {
    ModelParams p;
    p.theta_u = {1, 1};
    p.theta_o = {1};
    p.alpha_u = {0.8, 0.5};
    p.beta_u = {0.7, 0.7};
    p.sigma = 0.3;
    Precursors pre;
    pre.entries = {{0, 0.5}, {1, 2.0}};
    CHECK(social_intensity(p, 0, pre) == doctest::Approx(0.6740805394309416).epsilon(1e-12));
    CHECK(social_intensity(p, 0, Precursors{}) == doctest::Approx(0.0));
}

TEST_CASE("self-exciting intensity uses the target's own alpha and beta") {
    ModelParams p;
    p.alpha_u = {0.6, 0.2};
    p.beta_u = {0.5, 0.9};
    p.sigma = 0.1;
    Precursors own;
    own.entries = {{0, 1.0}, {0, 3.0}};
    const double expected = 0.6 * 0.5 * (std::exp(-0.1) + std::exp(-0.3));
    CHECK(self_exciting_intensity(p, 0, own) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("weight grid lookup clamps to the last bucket") {
    ModelSpec spec;
    ModelParams p;
    p.w = {0.1, 0.2, 0.3};
    CHECK(weight_at(spec, p, 0.0) == doctest::Approx(0.1));
    CHECK(weight_at(spec, p, 6.99) == doctest::Approx(0.1));
    CHECK(weight_at(spec, p, 7.0) == doctest::Approx(0.2));
    CHECK(weight_at(spec, p, 1000.0) == doctest::Approx(0.3)); // clamped
}

TEST_CASE("bid log-density: frozen value, normalization, and domain") {
    CHECK(bid_logpdf(2.5, 3, 1.2) == doctest::Approx(-1.313601046429771).epsilon(1e-12));
    // numeric quadrature of exp(logpdf) over the support must give ~1
    for (const int shape : {1, 3, 50}) {
        const double kappa = 0.8;
        const double upper = (shape + 12.0 * std::sqrt(static_cast<double>(shape))) / kappa;
        const int n = 200000;
        const double h = upper / n;
        double mass = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) * h;
            mass += std::exp(bid_logpdf(x, shape, kappa)) * h;
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
    }
    CHECK_THROWS_AS(bid_logpdf(-1.0, 1, 1.0), std::domain_error);
    CHECK_THROWS_AS(bid_logpdf(1.0, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(bid_logpdf(1.0, 1, 0.0), std::invalid_argument);
}

TEST_CASE("total log-likelihood matches the frozen reference for every variant") {
    const EventLog log = fixed_log();
    const struct {
        Variant v;
        double expected;
    } cases[] = {
        {Variant::PP, -20.10788046431783},  {Variant::HP, -22.564344745804036},
        {Variant::IB, -22.611331869262465}, {Variant::CC, -20.170002430535817},
        {Variant::MHMl, -33.8178857700244}, {Variant::MHMe, -31.3918739476282},
    };
    for (const auto& c : cases) {
        CAPTURE(variant_name(c.v));
        ModelSpec spec;
        spec.variant = c.v;
        const ModelParams p = fixed_params(spec, log.t_end());
        const ObservationSet obs = build_observations(spec, log);
        CHECK(total_log_likelihood(p, obs) == doctest::Approx(c.expected).epsilon(1e-10));
    }
}

TEST_CASE("build_observations: durations, bid shapes, censored tails") {
    ModelSpec spec;
    spec.variant = Variant::MHMe;
    const EventLog log = fixed_log();
    const ObservationSet obs = build_observations(spec, log);
    REQUIRE(obs.observations.size() == 6); // 4 events + 2 censored tails
    const Observation& o0 = obs.observations[0];
    CHECK(o0.anchor == doctest::Approx(0.0));
    CHECK(o0.duration == doctest::Approx(1.2));
    CHECK(o0.bid_shape == 1); // clamped before the first purchase
    const Observation& o3 = obs.observations[3];
    CHECK(o3.anchor == doctest::Approx(4.0)); // previous event of user 0, any item
    CHECK(o3.duration == doctest::Approx(3.8));
    CHECK(o3.bid_shape == 2);
    CHECK(obs.precursors_of(o3).size() == 2); // both earlier item-0 events
    const Observation& c0 = obs.observations[4];
    CHECK(c0.censored);
    CHECK(c0.user == 0);
    CHECK(c0.item == 0); // user 0's last purchased item
    CHECK(c0.duration == doctest::Approx(2.2));
}

TEST_CASE("precursor cap keeps only the most recent events") {
    ModelSpec spec;
    spec.variant = Variant::IB;
    spec.precursor_cap = 2;
    std::vector<PurchaseEvent> ev;
    for (int i = 0; i < 6; ++i) ev.push_back({0, 0, 1.0 + i, 1.0});
    const EventLog log(std::move(ev), 10.0, 1, 1);
    const ObservationSet obs = build_observations(spec, log);
    const Observation& last = obs.observations[5];
    CHECK_FALSE(last.censored);
    const auto pre = obs.precursors_of(last);
    REQUIRE(pre.size() == 2);
    CHECK(pre[0].time == doctest::Approx(4.0));
    CHECK(pre[1].time == doctest::Approx(5.0));
}

TEST_CASE("cumulative hazard equals the naive per-day reference") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const Variant v : {Variant::PP, Variant::HP, Variant::IB, Variant::CC, Variant::MHMl,
                            Variant::MHMe}) {
        CAPTURE(variant_name(v));
        ModelSpec spec;
        spec.variant = v;
        ModelParams p = fixed_params(spec, 40.0);
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<PrecursorEvent> stream;
            double t = 0.0;
            for (int j = 0; j < 8; ++j) {
                t += 3.0 * unif(rng);
                stream.push_back({j % 2, t});
            }
            const double anchor = 5.0 * unif(rng);
            const double dur = 0.5 + 20.0 * unif(rng);
            const double fast = cumulative_hazard(spec, p, 0, 1, anchor, stream, dur);
            const double slow = naive_cumulative_hazard(spec, p, 0, 1, anchor, stream, dur);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
        }
    }
}

TEST_CASE("survival and survival_curve agree and decrease") {
    ModelSpec spec;
    spec.variant = Variant::MHMe;
    const ModelParams p = fixed_params(spec, 40.0);
    const std::vector<PrecursorEvent> stream = {{0, 0.4}, {1, 1.7}, {0, 6.3}};
    const auto curve = survival_curve(spec, p, 0, 1, 2.0, stream, 15);
    REQUIRE(curve.size() == 16);
    CHECK(curve[0] == doctest::Approx(1.0));
    for (int tau = 1; tau <= 15; ++tau) {
        CHECK(curve[static_cast<std::size_t>(tau)] <= curve[static_cast<std::size_t>(tau) - 1]);
        CHECK(curve[static_cast<std::size_t>(tau)] ==
              doctest::Approx(survival(spec, p, 0, 1, 2.0, stream, tau)).epsilon(1e-12));
    }
}

TEST_CASE("PP survival factorizes over independent pairs (superposition)") {
    ModelSpec spec;
    spec.variant = Variant::PP;
    ModelParams p;
    p.theta_u = {0.3};
    p.theta_o = {0.4, 0.9, 1.3};
    p.sigma = 0.1;
    // hazard of (u, i0) + hazard of (u, i1) == hazard of a pair whose
    // theta_o is the sum, so the survivals multiply
    ModelParams q = p;
    q.theta_o = {0.4 + 0.9, 1.0, 1.0};
    const double t = 7.0;
    const double s01 = survival(spec, p, 0, 0, 0.0, {}, t) * survival(spec, p, 0, 1, 0.0, {}, t);
    CHECK(s01 == doctest::Approx(survival(spec, q, 0, 0, 0.0, {}, t)).epsilon(1e-12));
}

TEST_CASE("PP likelihood is invariant under theta_u * c, theta_o / c") {
    ModelSpec spec;
    spec.variant = Variant::PP;
    const EventLog log = fixed_log();
    const ObservationSet obs = build_observations(spec, log);
    ModelParams p = fixed_params(spec, log.t_end());
    ModelParams scaled = p;
    const double c = 3.7;
    for (double& v : scaled.theta_u) v *= c;
    for (double& v : scaled.theta_o) v /= c;
    CHECK(total_log_likelihood(p, obs) ==
          doctest::Approx(total_log_likelihood(scaled, obs)).epsilon(1e-12));
}

TEST_CASE("MHMe with zero influence reduces to the homogeneous base-price hazard") {
    ModelSpec spec;
    spec.variant = Variant::MHMe;
    ModelParams p = fixed_params(spec, 40.0);
    p.alpha_u = {0.0, 0.0};
    const std::vector<PrecursorEvent> stream = {{1, 0.5}, {0, 2.0}};
    ModelSpec pp;
    pp.variant = Variant::PP;
    ModelParams q = p;
    // fold the price perception into theta_u for the homogeneous reference
    for (std::size_t u = 0; u < q.theta_u.size(); ++u) q.theta_u[u] *= q.kappa_u[u];
    CHECK(cumulative_hazard(spec, p, 0, 1, 0.0, stream, 12.0) ==
          doctest::Approx(cumulative_hazard(pp, q, 0, 1, 0.0, stream, 12.0)).epsilon(1e-12));
}

TEST_CASE("hazard floor keeps degenerate intensities positive") {
    ModelSpec spec;
    spec.variant = Variant::PP;
    ModelParams p;
    p.theta_u = {0.0};
    p.theta_o = {0.0};
    CHECK(hazard_rate(spec, p, 0, 0, 1.0, {}) == doctest::Approx(kHazardFloor));
}

TEST_CASE("analytic likelihood gradient matches central finite differences") {
    const EventLog log = fixed_log();
    const double h = 1e-6;
    for (const Variant v : {Variant::PP, Variant::HP, Variant::IB, Variant::CC, Variant::MHMl,
                            Variant::MHMe}) {
        CAPTURE(variant_name(v));
        ModelSpec spec;
        spec.variant = v;
        const ObservationSet obs = build_observations(spec, log);
        ModelParams p = fixed_params(spec, log.t_end());
        ParamGrad grad;
        total_log_likelihood_grad(p, obs, grad);

        const auto check_fd = [&](double* slot, double analytic) {
            const double keep = *slot;
            *slot = keep + h;
            const double up = total_log_likelihood(p, obs);
            *slot = keep - h;
            const double dn = total_log_likelihood(p, obs);
            *slot = keep;
            const double fd = (up - dn) / (2 * h);
            CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
        };
        for (std::size_t i = 0; i < p.theta_u.size(); ++i) check_fd(&p.theta_u[i], grad.theta_u[i]);
        for (std::size_t i = 0; i < p.theta_o.size(); ++i) check_fd(&p.theta_o[i], grad.theta_o[i]);
        if (has_price(v)) {
            for (std::size_t i = 0; i < p.kappa_u.size(); ++i) check_fd(&p.kappa_u[i], grad.kappa_u[i]);
        }
        if (has_social(v)) {
            for (std::size_t i = 0; i < p.alpha_u.size(); ++i) check_fd(&p.alpha_u[i], grad.alpha_u[i]);
            for (std::size_t i = 0; i < p.beta_u.size(); ++i) check_fd(&p.beta_u[i], grad.beta_u[i]);
            check_fd(&p.sigma, grad.sigma);
        }
        if (has_weight(v)) {
            for (std::size_t i = 0; i < 4; ++i) check_fd(&p.w[i], grad.w[i]);
        }
    }
}
