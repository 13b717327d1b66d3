#include <doctest.h>

#include <cmath>

#include "stpp/baseline.hpp"
#include "stpp/trainer.hpp"
#include "support/oracles.hpp"

using namespace stpp;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Baseline with zero recurrent weights and fixed heads: the hidden state
// stays at zero, so lambda, mu, sigma are constants set through the biases.
BaselineParams constant_baseline(double rate, const Eigen::Vector2d& mean,
                                 const Eigen::Vector2d& variance) {
    BaselineParams p = make_baseline(RecurrentMode::rnn, 3);
    p.b_rate = inv_softplus(rate);
    p.b_mean = mean;
    p.b_var = {inv_softplus(variance[0]), inv_softplus(variance[1])};
    return p;
}

EventSequence two_event_toy() {
    EventSequence seq;
    seq.horizon = 2.0;
    seq.events.push_back({0.6, {0.2, -0.1}});
    seq.events.push_back({1.4, {-0.3, 0.4}});
    return seq;
}

double gaussian_log_pdf(const Eigen::Vector2d& u, const Eigen::Vector2d& mean,
                        const Eigen::Vector2d& variance) {
    double out = -std::log(kTwoPi);
    for (int j = 0; j < 2; ++j) {
        const double diff = u[j] - mean[j];
        out -= 0.5 * std::log(variance[j]);
        out -= 0.5 * diff * diff / variance[j];
    }
    return out;
}

}  // namespace

TEST_SUITE("baseline") {

TEST_CASE("cond_log_density matches the hand-evaluated formula") {
    const BaselineParams p = constant_baseline(1.0, {0.0, 0.0}, {1.0, 1.0});
    const HiddenState s = initial_state(p.cell);
    // lambda=1, delta=1 at the Gaussian mode: -1 + log(1/(2 pi))
    const double expected = -1.0 + std::log(1.0 / kTwoPi);
    CHECK(cond_log_density(p, s, 1.0, {0.0, 0.0}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-2.83788).epsilon(1e-5));

    CHECK_THROWS_AS(cond_log_density(p, s, 0.0, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(cond_log_density(p, s, -0.5, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("conditional density integrates to one and peaks at the mean") {
    const BaselineParams p = constant_baseline(1.7, {0.3, -0.2}, {0.4, 0.9});
    const HiddenState s = initial_state(p.cell);
    const BaselineHeads heads = baseline_heads(p, s.h);

    // product quadrature: exponential in time out to 30/lambda, Gaussian
    // plus/minus 8 standard deviations per axis
    const int nt = 4000, nu = 400;
    const double t_max = 30.0 / heads.rate;
    const double dt = t_max / nt;
    double time_mass = 0.0;
    for (int i = 0; i < nt; ++i) {
        const double t = (i + 0.5) * dt;
        time_mass += heads.rate * std::exp(-heads.rate * t) * dt;
    }
    double space_mass = 0.0;
    const double sx = std::sqrt(heads.variance[0]);
    const double sy = std::sqrt(heads.variance[1]);
    const double dx = 16.0 * sx / nu;
    const double dy = 16.0 * sy / nu;
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nu; ++j) {
            const Eigen::Vector2d u{heads.mean[0] - 8.0 * sx + (i + 0.5) * dx,
                                    heads.mean[1] - 8.0 * sy + (j + 0.5) * dy};
            // strip the known time factor from cond_log_density at delta=1
            const double log_pdf = cond_log_density(p, s, 1.0, u);
            const double time_part = std::log(heads.rate) - heads.rate * 1.0;
            space_mass += std::exp(log_pdf - time_part) * dx * dy;
        }
    }
    CHECK(time_mass * space_mass == doctest::Approx(1.0).epsilon(1e-3));

    const double at_mode = cond_log_density(p, s, 0.5, heads.mean);
    CHECK(at_mode > cond_log_density(p, s, 0.5, heads.mean + Eigen::Vector2d{0.3, 0.0}));
    CHECK(at_mode > cond_log_density(p, s, 0.5, heads.mean + Eigen::Vector2d{0.0, -0.4}));
}

TEST_CASE("sequence_log_likelihood covers the spec cases") {
    const BaselineParams p = constant_baseline(1.0, {0.0, 0.0}, {1.0, 1.0});

    // empty sequence with lambda = 1, T = 2: pure survival, -2
    EventSequence empty;
    empty.horizon = 2.0;
    CHECK(sequence_log_likelihood(p, empty) == doctest::Approx(-2.0).epsilon(1e-12));

    // single event: conditional term plus tail
    EventSequence one;
    one.horizon = 2.0;
    one.events.push_back({0.7, {0.1, 0.2}});
    const HiddenState s0 = initial_state(p.cell);
    const double step = cond_log_density(p, s0, 0.7, {0.1, 0.2});
    const HiddenState s1 = cell_step(p.cell, Eigen::Vector3d{0.7, 0.1, 0.2}, s0);
    const double tail = baseline_heads(p, s1.h).rate * (2.0 - 0.7);
    CHECK(sequence_log_likelihood(p, one) == doctest::Approx(step - tail).epsilon(1e-12));

    EventSequence bad = one;
    bad.events.push_back({0.5, {0.0, 0.0}});
    CHECK_THROWS_AS(sequence_log_likelihood(p, bad), std::invalid_argument);
}

TEST_CASE("sequence_log_likelihood agrees with the intensity-integral route") {
    // Independent route: sum_i log[lambda_i N(u_i)] minus the numerically
    // integrated hazard, which is piecewise constant between events for this
    // memoryless conditional model (the Gaussian integrates to one in space).
    const BaselineParams p = init_baseline(RecurrentMode::lstm, 5, 77);
    const EventSequence seq = two_event_toy();

    HiddenState state = initial_state(p.cell);
    const std::vector<double> boundaries = {0.0, seq.events[0].time, seq.events[1].time,
                                            seq.horizon};
    double log_points = 0.0;
    double integral = 0.0;
    const int grid = 50000;
    for (std::size_t seg = 0; seg + 1 < boundaries.size(); ++seg) {
        const BaselineHeads heads = baseline_heads(p, state.h);
        const double a = boundaries[seg];
        const double b = boundaries[seg + 1];
        const double dt = (b - a) / grid;
        for (int i = 0; i < grid; ++i) integral += heads.rate * dt;
        if (seg < seq.events.size()) {
            const Event& e = seq.events[seg];
            log_points += std::log(heads.rate);
            log_points += gaussian_log_pdf(e.location, heads.mean, heads.variance);
            state = cell_step(p.cell, e.as_vector(), state);
        }
    }
    const double reference = log_points - integral;
    CHECK(sequence_log_likelihood(p, seq) == doctest::Approx(reference).epsilon(1e-4));
}

TEST_CASE("likelihood is continuous as an event approaches the horizon") {
    const BaselineParams p = constant_baseline(1.3, {0.1, 0.1}, {0.8, 0.6});
    EventSequence seq;
    seq.horizon = 2.0;
    seq.events.push_back({0.5, {0.0, 0.0}});
    seq.events.push_back({1.999999, {0.1, 0.1}});
    const double near = sequence_log_likelihood(p, seq);
    seq.events[1].time = 1.999999999;
    const double nearer = sequence_log_likelihood(p, seq);
    CHECK(std::abs(near - nearer) < 1e-4);
}

TEST_CASE("likelihood gradient matches finite differences") {
    for (const auto mode : {RecurrentMode::lstm, RecurrentMode::rnn}) {
        BaselineParams p = init_baseline(mode, 4, 31);
        const EventSequence seq = two_event_toy();

        const Eigen::VectorXd analytic = sequence_log_likelihood_grad(p, seq);
        Eigen::VectorXd flat = p.flatten();
        Eigen::VectorXd fd(flat.size());
        BaselineParams work = p;
        const double step = 1e-6;
        for (Eigen::Index i = 0; i < flat.size(); ++i) {
            Eigen::VectorXd up = flat, down = flat;
            up[i] += step;
            down[i] -= step;
            work.assign_from_flat(up);
            const double lu = sequence_log_likelihood(work, seq);
            work.assign_from_flat(down);
            const double ld = sequence_log_likelihood(work, seq);
            fd[i] = (lu - ld) / (2.0 * step);
        }
        const double rel = (analytic - fd).norm() / std::max(fd.norm(), 1e-300);
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("sampling is deterministic, valid, and respects the horizon") {
    const BaselineParams p = constant_baseline(3.0, {0.2, -0.3}, {0.5, 0.5});
    const StaticFeatures nf = StaticFeatures::Zero(0);
    const EventSequence a = sample_baseline(p, nf, 2.0, 11);
    const EventSequence b = sample_baseline(p, nf, 2.0, 11);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].location == b.events[i].location);
    }
    CHECK_FALSE(validate_sequence(a).has_value());
}

TEST_CASE("fit_mle improves the likelihood trend") {
    const BaselineParams truth = constant_baseline(2.0, {0.4, -0.5}, {0.3, 0.7});
    const StaticFeatures nf = StaticFeatures::Zero(0);
    std::vector<EventSequence> data;
    for (std::uint64_t s = 0; s < 64; ++s) {
        data.push_back(sample_baseline(truth, nf, 2.0, derive_seed(5150, s)));
    }
    BaselineFitConfig cfg;
    cfg.iterations = 200;
    cfg.batch = 16;
    cfg.seed = 3;
    const BaselineFitReport report = fit_mle(data, cfg, init_baseline(RecurrentMode::lstm, 4, 1));
    REQUIRE(report.nll_trace.size() == 200);
    // window trend, not strict monotonicity
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 100; ++i) {
        first += report.nll_trace[static_cast<std::size_t>(i)];
        last += report.nll_trace[static_cast<std::size_t>(100 + i)];
    }
    CHECK(last < first);
}

TEST_CASE("parametric bootstrap recovers constant head outputs within 5 percent") {
    const double true_rate = 2.0;
    const Eigen::Vector2d true_mean{0.3, -0.4};
    const Eigen::Vector2d true_var{0.25, 0.49};
    const BaselineParams truth = constant_baseline(true_rate, true_mean, true_var);
    const StaticFeatures nf = StaticFeatures::Zero(0);

    std::vector<EventSequence> data;
    std::size_t events = 0;
    std::uint64_t s = 0;
    while (events < 10000) {
        data.push_back(sample_baseline(truth, nf, 16.0, derive_seed(616, s++)));
        events += data.back().events.size();
    }

    BaselineFitConfig cfg;
    cfg.iterations = 600;
    cfg.batch = 24;
    cfg.seed = 4;
    const BaselineFitReport report = fit_mle(data, cfg, init_baseline(RecurrentMode::lstm, 4, 21));

    // compare head outputs averaged over the data-visited states
    double rate_sum = 0.0;
    Eigen::Vector2d mean_sum = Eigen::Vector2d::Zero();
    Eigen::Vector2d var_sum = Eigen::Vector2d::Zero();
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.size(); i += 4) {
        HiddenState state = initial_state(report.params.cell);
        for (const Event& e : data[i].events) {
            const BaselineHeads heads = baseline_heads(report.params, state.h);
            rate_sum += heads.rate;
            mean_sum += heads.mean;
            var_sum += heads.variance;
            ++count;
            state = cell_step(report.params.cell, e.as_vector(), state);
        }
    }
    const double n = static_cast<double>(count);
    CHECK(rate_sum / n == doctest::Approx(true_rate).epsilon(0.05));
    CHECK(mean_sum.x() / n == doctest::Approx(true_mean.x()).epsilon(0.05));
    CHECK(mean_sum.y() / n == doctest::Approx(true_mean.y()).epsilon(0.05));
    CHECK(var_sum.x() / n == doctest::Approx(true_var.x()).epsilon(0.05));
    CHECK(var_sum.y() / n == doctest::Approx(true_var.y()).epsilon(0.05));
}

}  // TEST_SUITE
