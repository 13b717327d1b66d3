#include <doctest.h>

#include <cmath>

#include "stpp/kernel.hpp"
#include "support/oracles.hpp"

using namespace stpp;
using stpp::testing::naive_mmd_squared;
using stpp::testing::random_batch;

namespace {

EventSequence single(double t, double x, double y, double horizon = 2.0) {
    EventSequence seq;
    seq.horizon = horizon;
    seq.events.push_back({t, {x, y}});
    return seq;
}

EmbeddingBatch batch_of(std::vector<EventSequence> seqs, BatchRole role) {
    return EmbeddingBatch{std::move(seqs), role};
}

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("kernel_eval matches the Gaussian formula") {
    KernelConfig cfg;
    const Event a{0.0, {0.0, 0.0}};
    CHECK(kernel_eval(a, a, cfg) == doctest::Approx(1.0).epsilon(1e-15));

    const Event b{1.0, {0.0, 0.0}};
    CHECK(kernel_eval(a, b, cfg) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

    KernelConfig wide;
    wide.bandwidth = 1e6;
    CHECK(kernel_eval(a, b, wide) == doctest::Approx(1.0).epsilon(1e-9));

    Event bad = b;
    bad.time = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(kernel_eval(a, bad, cfg), std::invalid_argument);

    KernelConfig matern;
    matern.kind = KernelKind::matern;
    CHECK_THROWS_AS(kernel_eval(a, b, matern), std::invalid_argument);
}

TEST_CASE("mmd_squared handles the degenerate spec cases") {
    KernelConfig cfg;
    Rng rng(7);
    const auto seqs = random_batch(rng, 5, 20, 2.0);
    const auto expert = batch_of(seqs, BatchRole::expert);
    const auto learner = batch_of(seqs, BatchRole::learner);
    CHECK(mmd_squared(expert, learner, cfg) == doctest::Approx(0.0).epsilon(1e-12));

    // single expert event against an empty learner sequence: k(e,e)/1 = 1
    const auto e1 = batch_of({single(0.5, 0.1, -0.3)}, BatchRole::expert);
    EventSequence empty;
    empty.horizon = 2.0;
    const auto l1 = batch_of({empty}, BatchRole::learner);
    CHECK(mmd_squared(e1, l1, cfg) == doctest::Approx(1.0).epsilon(1e-15));

    // two singleton events at distance d: 2 - 2 exp(-d^2/2)
    const Event p{0.3, {0.2, 0.4}};
    const Event q{1.1, {-0.5, 0.9}};
    const double d2 = (p.as_vector() - q.as_vector()).squaredNorm();
    const auto ep = batch_of({single(p.time, p.location.x(), p.location.y())}, BatchRole::expert);
    const auto lq = batch_of({single(q.time, q.location.x(), q.location.y())}, BatchRole::learner);
    CHECK(mmd_squared(ep, lq, cfg) ==
          doctest::Approx(2.0 - 2.0 * std::exp(-d2 / 2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(mmd_squared(batch_of({}, BatchRole::expert), l1, cfg), std::invalid_argument);
}

TEST_CASE("mmd_squared rejects mixed horizons within one batch") {
    KernelConfig cfg;
    auto a = single(0.5, 0.0, 0.0, 2.0);
    auto b = single(0.7, 0.0, 0.0, 3.0);
    const auto expert = batch_of({a, b}, BatchRole::expert);
    const auto learner = batch_of({a}, BatchRole::learner);
    CHECK_THROWS_AS(mmd_squared(expert, learner, cfg), std::invalid_argument);
}

TEST_CASE("mmd_squared agrees with the naive double-sum reference") {
    KernelConfig cfg;
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        cfg.bandwidth = 0.3 + rng.uniform01() * 2.0;
        const auto expert_seqs = random_batch(rng, 2 + static_cast<int>(rng.uniform01() * 6), 15, 2.0);
        const auto learner_seqs = random_batch(rng, 2 + static_cast<int>(rng.uniform01() * 6), 15, 2.0);
        const double fast = mmd_squared(batch_of(expert_seqs, BatchRole::expert),
                                        batch_of(learner_seqs, BatchRole::learner), cfg);
        const double naive = naive_mmd_squared(expert_seqs, learner_seqs, cfg.bandwidth);
        CHECK(std::abs(fast - std::max(naive, 0.0)) <= 1e-9);
        CHECK(fast >= 0.0);

        // symmetric in roles
        const double swapped = mmd_squared(batch_of(learner_seqs, BatchRole::expert),
                                           batch_of(expert_seqs, BatchRole::learner), cfg);
        CHECK(fast == doctest::Approx(swapped).epsilon(1e-12));
    }
}

TEST_CASE("unbiased estimator drops same-sequence pairs") {
    KernelConfig cfg;
    Rng rng(13);
    const auto expert_seqs = random_batch(rng, 4, 10, 2.0);
    const auto learner_seqs = random_batch(rng, 4, 10, 2.0);

    // reference: V-statistic minus the diagonal sequence blocks, renormalized
    auto unbiased_ref = [&](const std::vector<EventSequence>& a,
                            const std::vector<EventSequence>& b) {
        const double L = static_cast<double>(a.size());
        const double M = static_cast<double>(b.size());
        double ee = 0.0, ll = 0.0, el = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) {
                if (i == j) continue;
                for (const auto& e1 : a[i].events)
                    for (const auto& e2 : a[j].events)
                        ee += kernel_eval(e1, e2, cfg);
            }
        for (std::size_t i = 0; i < b.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) {
                if (i == j) continue;
                for (const auto& e1 : b[i].events)
                    for (const auto& e2 : b[j].events)
                        ll += kernel_eval(e1, e2, cfg);
            }
        for (const auto& s1 : a)
            for (const auto& e1 : s1.events)
                for (const auto& s2 : b)
                    for (const auto& e2 : s2.events)
                        el += kernel_eval(e1, e2, cfg);
        return ee / (L * (L - 1.0)) + ll / (M * (M - 1.0)) - 2.0 * el / (L * M);
    };

    const double got = mmd_squared(batch_of(expert_seqs, BatchRole::expert),
                                   batch_of(learner_seqs, BatchRole::learner), cfg,
                                   MmdEstimator::unbiased);
    const double want = unbiased_ref(expert_seqs, learner_seqs);
    CHECK(got == doctest::Approx(std::max(want, 0.0)).epsilon(1e-10));

    CHECK_THROWS_AS(mmd_squared(batch_of({expert_seqs[0]}, BatchRole::expert),
                                batch_of(learner_seqs, BatchRole::learner), cfg,
                                MmdEstimator::unbiased),
                    std::invalid_argument);
}

TEST_CASE("blocked evaluation matches the one-shot path and the naive reference") {
    // force tiny Gram blocks so batches straddle many block boundaries
    const Eigen::Index saved_cap = detail::gram_block_entry_cap;
    KernelConfig cfg;
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        cfg.bandwidth = 0.5 + rng.uniform01();
        const auto expert_seqs = random_batch(rng, 4, 30, 2.0);
        const auto learner_seqs = random_batch(rng, 4, 30, 2.0);
        const auto expert = batch_of(expert_seqs, BatchRole::expert);
        const auto learner = batch_of(learner_seqs, BatchRole::learner);

        detail::gram_block_entry_cap = saved_cap;
        const double full = mmd_squared(expert, learner, cfg);
        const double full_u = mmd_squared(expert, learner, cfg, MmdEstimator::unbiased);
        const auto grads_full = mmd_grad_events(expert, learner, cfg);

        detail::gram_block_entry_cap = 97;  // a few dozen columns per block
        const double blocked = mmd_squared(expert, learner, cfg);
        const double blocked_u = mmd_squared(expert, learner, cfg, MmdEstimator::unbiased);
        const auto grads_blocked = mmd_grad_events(expert, learner, cfg);
        detail::gram_block_entry_cap = saved_cap;

        CHECK(std::abs(blocked - full) <= 1e-9);
        CHECK(std::abs(blocked_u - full_u) <= 1e-9);
        CHECK(std::abs(blocked - std::max(naive_mmd_squared(expert_seqs, learner_seqs,
                                                            cfg.bandwidth), 0.0)) <= 1e-9);
        for (std::size_t s = 0; s < grads_full.size(); ++s) {
            REQUIRE(grads_full[s].cols() == grads_blocked[s].cols());
            if (grads_full[s].cols() > 0) {
                CHECK((grads_full[s] - grads_blocked[s]).cwiseAbs().maxCoeff() <= 1e-9);
            }
        }
    }
}

TEST_CASE("mmd_grad_events matches central finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        KernelConfig cfg;
        cfg.bandwidth = 0.5 + rng.uniform01();
        auto expert_seqs = random_batch(rng, 3, 8, 2.0);
        auto learner_seqs = random_batch(rng, 3, 8, 2.0);
        const auto expert = batch_of(expert_seqs, BatchRole::expert);
        const auto grads = mmd_grad_events(expert, batch_of(learner_seqs, BatchRole::learner), cfg);

        std::vector<double> fd, an;
        const double step = 1e-5;
        for (std::size_t s = 0; s < learner_seqs.size(); ++s) {
            for (std::size_t i = 0; i < learner_seqs[s].events.size(); ++i) {
                for (int coord = 0; coord < 3; ++coord) {
                    auto eval_at = [&](double delta) {
                        auto perturbed = learner_seqs;
                        Event& e = perturbed[s].events[i];
                        if (coord == 0) {
                            e.time += delta;
                        } else {
                            e.location[coord - 1] += delta;
                        }
                        return naive_mmd_squared(expert_seqs, perturbed, cfg.bandwidth);
                    };
                    fd.push_back((eval_at(step) - eval_at(-step)) / (2.0 * step));
                    an.push_back(grads[s](coord, static_cast<Eigen::Index>(i)));
                }
            }
        }
        if (!fd.empty()) {
            CHECK(stpp::testing::gradient_relative_error(fd, an) <= 1e-6);
        }
    }
}

TEST_CASE("mmd_grad_events vanishes far from all mass and at symmetric centers") {
    KernelConfig cfg;
    // learner event far from everything: Gaussian tails kill the gradient
    const auto expert = batch_of({single(0.1, 0.0, 0.0)}, BatchRole::expert);
    EventSequence far;
    far.horizon = 2.0;
    far.events.push_back({1.9, {100.0, 100.0}});
    const auto grads = mmd_grad_events(expert, batch_of({far}, BatchRole::learner), cfg);
    CHECK(grads[0].col(0).norm() <= 1e-10);

    // learner identical to a symmetric expert: gradient cancels at the center
    EventSequence sym;
    sym.horizon = 2.0;
    sym.events.push_back({0.5, {-1.0, 0.0}});
    sym.events.push_back({1.0, {0.0, 0.0}});
    sym.events.push_back({1.5, {1.0, 0.0}});
    const auto g2 = mmd_grad_events(batch_of({sym}, BatchRole::expert),
                                    batch_of({sym}, BatchRole::learner), cfg);
    CHECK(g2[0].cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("reward_field separates expert-heavy from learner-heavy regions") {
    KernelConfig cfg;
    cfg.bandwidth = 0.5;
    // expert cluster at p, learner cluster at q
    std::vector<EventSequence> expert_seqs, learner_seqs;
    Rng rng(23);
    for (int s = 0; s < 4; ++s) {
        EventSequence e, l;
        e.horizon = l.horizon = 2.0;
        double te = 0.0, tl = 0.0;
        for (int i = 0; i < 6; ++i) {
            te += 0.05 + 0.02 * rng.uniform01();
            tl += 0.05 + 0.02 * rng.uniform01();
            e.events.push_back({te, {-1.0 + 0.05 * rng.normal(), -1.0 + 0.05 * rng.normal()}});
            l.events.push_back({tl, {1.0 + 0.05 * rng.normal(), 1.0 + 0.05 * rng.normal()}});
        }
        expert_seqs.push_back(e);
        learner_seqs.push_back(l);
    }
    const auto expert = batch_of(expert_seqs, BatchRole::expert);
    const auto learner = batch_of(learner_seqs, BatchRole::learner);

    const Event at_expert{0.2, {-1.0, -1.0}};
    const Event at_learner{0.2, {1.0, 1.0}};
    CHECK(reward_field(expert, learner, at_expert, cfg) > 0.0);
    CHECK(reward_field(expert, learner, at_learner, cfg) < 0.0);

    // antisymmetry under role swap
    const double fwd = reward_field(expert, learner, at_expert, cfg);
    const double rev = reward_field(learner, expert, at_expert, cfg);
    CHECK(fwd == doctest::Approx(-rev).epsilon(1e-12));

    // identical batches: identically zero
    CHECK(reward_field(expert, batch_of(expert_seqs, BatchRole::learner), at_expert, cfg) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // learner with no events: reward equals the nonnegative expert mass
    EventSequence empty;
    empty.horizon = 2.0;
    const double mass = reward_field(expert, batch_of({empty}, BatchRole::learner), at_expert, cfg);
    CHECK(mass >= 0.0);
}

}  // TEST_SUITE
