#include <doctest.h>

#include <cmath>

#include "stpp/trainer.hpp"
#include "support/oracles.hpp"

using namespace stpp;
using stpp::testing::naive_mmd_squared;

namespace {

GeneratorDims tiny_dims() {
    GeneratorDims d;
    d.hidden = 4;
    d.mlp_hidden = 3;
    d.noise = 2;
    d.features = 0;
    return d;
}

const StaticFeatures kNoFeatures = StaticFeatures::Zero(0);

// Finite-difference gradient of D^2(expert, replay(theta)) with frozen noise
// and frozen event count, evaluated coordinate by coordinate. Uses only the
// forward replay plus the naive discrepancy, staying off the backprop path.
Eigen::VectorXd fd_gradient(const GeneratorParams& params,
                            const std::vector<EventSequence>& expert_seqs,
                            const std::vector<RolloutTrace>& traces, double bandwidth,
                            double step) {
    GeneratorParams work = params;
    Eigen::VectorXd flat = params.flatten();
    Eigen::VectorXd grad(flat.size());
    auto loss_at = [&](const Eigen::VectorXd& theta) {
        work.assign_from_flat(theta);
        std::vector<EventSequence> learner;
        for (const RolloutTrace& tr : traces) {
            learner.push_back(
                rollout_with_noise(work, kNoFeatures, tr.noises, tr.sequence.horizon));
        }
        return naive_mmd_squared(expert_seqs, learner, bandwidth);
    };
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        Eigen::VectorXd up = flat, down = flat;
        up[i] += step;
        down[i] -= step;
        grad[i] = (loss_at(up) - loss_at(down)) / (2.0 * step);
    }
    return grad;
}

std::vector<EventSequence> tiny_expert(Rng& rng, int n) {
    std::vector<EventSequence> out;
    for (int s = 0; s < n; ++s) {
        EventSequence seq;
        seq.horizon = 2.0;
        double t = 0.0;
        const int count = 2 + static_cast<int>(rng.uniform01() * 3);
        for (int i = 0; i < count; ++i) {
            t += 0.15 + 0.3 * rng.uniform01();
            if (t >= 2.0) break;
            seq.events.push_back({t, {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}});
        }
        out.push_back(seq);
    }
    return out;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("backprop_rollout returns zero for zero event gradients") {
    for (const auto mode : {RecurrentMode::lstm, RecurrentMode::rnn}) {
        GeneratorParams p = init_generator(mode, tiny_dims(), 7);
        const RolloutTrace trace = rollout(p, kNoFeatures, 2.0, 3);
        REQUIRE(trace.sequence.events.size() > 0);
        const Eigen::Matrix3Xd zeros =
            Eigen::Matrix3Xd::Zero(3, static_cast<Eigen::Index>(trace.sequence.events.size()));
        const GeneratorParams grad = backprop_rollout(p, trace, kNoFeatures, zeros);
        CHECK(grad.flatten().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("single-event trace with zero recurrent weights only reaches emission weights") {
    GeneratorParams p = init_generator(RecurrentMode::rnn, tiny_dims(), 11);
    p.cell.V.setZero();
    p.cell.W.setZero();
    p.cell.B.setZero();
    RolloutTrace trace = rollout(p, kNoFeatures, 2.0, 5);
    REQUIRE(trace.sequence.events.size() >= 1);
    trace.sequence.events.resize(1);
    trace.noises.resize(1);
    trace.states.resize(1);
    trace.sequence.horizon = 2.0;

    Eigen::Matrix3Xd g(3, 1);
    g << 1.0, 0.5, -0.25;
    const GeneratorParams grad = backprop_rollout(p, trace, kNoFeatures, g);
    CHECK(grad.cell.V.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.cell.W.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.cell.B.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.H2.cwiseAbs().maxCoeff() > 0.0);
    CHECK(grad.U2.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("backprop_rollout rejects a trace from different parameters") {
    GeneratorParams p = init_generator(RecurrentMode::lstm, tiny_dims(), 13);
    GeneratorParams q = init_generator(RecurrentMode::lstm, tiny_dims(), 14);
    const RolloutTrace trace = rollout(p, kNoFeatures, 2.0, 1);
    REQUIRE(trace.sequence.events.size() > 0);
    const Eigen::Matrix3Xd g =
        Eigen::Matrix3Xd::Ones(3, static_cast<Eigen::Index>(trace.sequence.events.size()));
    CHECK_THROWS_AS(backprop_rollout(q, trace, kNoFeatures, g), std::invalid_argument);
}

TEST_CASE("full-pipeline gradient matches finite differences on a tiny model") {
    Rng rng(101);
    for (const auto mode : {RecurrentMode::lstm, RecurrentMode::rnn}) {
        GeneratorParams p = init_generator(mode, tiny_dims(), 51);
        const auto expert_seqs = tiny_expert(rng, 3);

        std::vector<RolloutTrace> traces;
        for (std::uint64_t m = 0; m < 2; ++m) {
            RolloutTrace tr = rollout(p, kNoFeatures, 2.0, derive_seed(9, m));
            if (tr.sequence.events.size() > 5) {
                tr.sequence.events.resize(5);
                tr.noises.resize(5);
                tr.states.resize(5);
            }
            traces.push_back(std::move(tr));
        }

        KernelConfig kernel;
        EmbeddingBatch expert{expert_seqs, BatchRole::expert};
        EmbeddingBatch learner{{}, BatchRole::learner};
        for (const auto& tr : traces) learner.sequences.push_back(tr.sequence);
        const auto event_grads = mmd_grad_events(expert, learner, kernel);

        Eigen::VectorXd analytic = Eigen::VectorXd::Zero(p.parameter_count());
        for (std::size_t m = 0; m < traces.size(); ++m) {
            analytic += backprop_rollout(p, traces[m], kNoFeatures, event_grads[m]).flatten();
        }
        const Eigen::VectorXd fd = fd_gradient(p, expert_seqs, traces, kernel.bandwidth, 1e-5);

        const double rel = (analytic - fd).norm() / std::max(fd.norm(), 1e-300);
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("train with zero iterations or zero learning rate keeps parameters") {
    Rng rng(55);
    const auto expert = tiny_expert(rng, 8);
    GeneratorParams p = init_generator(RecurrentMode::lstm, tiny_dims(), 2);

    TrainConfig cfg;
    cfg.iterations = 0;
    cfg.batch_expert = 4;
    cfg.batch_learner = 4;
    const TrainReport none = train(expert, cfg, p);
    CHECK((none.params.flatten() - p.flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(none.d2_trace.empty());

    cfg.iterations = 3;
    cfg.learning_rate = 0.0;
    const TrainReport frozen = train(expert, cfg, p);
    CHECK((frozen.params.flatten() - p.flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(frozen.d2_trace.size() == 3);
}

TEST_CASE("train is bitwise reproducible under a fixed seed") {
    Rng rng(56);
    const auto expert = tiny_expert(rng, 8);
    GeneratorParams p = init_generator(RecurrentMode::lstm, tiny_dims(), 2);

    TrainConfig cfg;
    cfg.iterations = 5;
    cfg.batch_expert = 4;
    cfg.batch_learner = 4;
    cfg.seed = 31337;
    cfg.threads = 1;
    const TrainReport a = train(expert, cfg, p);
    const TrainReport b = train(expert, cfg, p);
    REQUIRE(a.d2_trace.size() == b.d2_trace.size());
    for (std::size_t i = 0; i < a.d2_trace.size(); ++i) CHECK(a.d2_trace[i] == b.d2_trace[i]);
    CHECK((a.params.flatten() - b.params.flatten()).cwiseAbs().maxCoeff() == 0.0);

    // parallel execution reduces in index order, so it matches serial bitwise
    cfg.threads = 4;
    const TrainReport c = train(expert, cfg, p);
    for (std::size_t i = 0; i < a.d2_trace.size(); ++i) CHECK(a.d2_trace[i] == c.d2_trace[i]);
    CHECK((a.params.flatten() - c.params.flatten()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train errors on an empty expert set and mixed horizons") {
    TrainConfig cfg;
    GeneratorParams p = init_generator(RecurrentMode::lstm, tiny_dims(), 2);
    CHECK_THROWS_AS(train({}, cfg, p), std::invalid_argument);

    Rng rng(57);
    auto expert = tiny_expert(rng, 4);
    expert[1].horizon = 3.0;
    CHECK_THROWS_AS(train(expert, cfg, p), std::invalid_argument);
}

TEST_CASE("self-imitation training approaches the expert noise floor") {
    // Expert data generated by a known generator; training a fresh generator
    // on it must reach D^2 below twice the expert self-discrepancy.
    GeneratorParams star = init_generator(RecurrentMode::lstm, tiny_dims(), 900);
    std::vector<EventSequence> expert;
    for (std::uint64_t s = 0; s < 96; ++s) {
        expert.push_back(rollout(star, kNoFeatures, 2.0, derive_seed(71, s)).sequence);
    }

    TrainConfig cfg;
    cfg.iterations = 1200;
    cfg.batch_expert = 16;
    cfg.batch_learner = 16;
    cfg.seed = 5;
    cfg.threads = 0;

    GeneratorParams p = init_generator(RecurrentMode::lstm, tiny_dims(), 901);
    const TrainReport report = train(expert, cfg, p);

    const double floor = expert_self_discrepancy(expert, cfg);
    std::vector<EventSequence> generated;
    for (std::uint64_t s = 0; s < 48; ++s) {
        generated.push_back(rollout(report.params, kNoFeatures, 2.0, derive_seed(72, s)).sequence);
    }
    Rng rng(58);
    double d2_mean = 0.0;
    for (int r = 0; r < 10; ++r) {
        EmbeddingBatch e{{}, BatchRole::expert};
        EmbeddingBatch g{{}, BatchRole::learner};
        for (int i = 0; i < 16; ++i) {
            e.sequences.push_back(expert[static_cast<std::size_t>(rng.uniform01() * 96) % 96]);
            g.sequences.push_back(generated[static_cast<std::size_t>(rng.uniform01() * 48) % 48]);
        }
        d2_mean += mmd_squared(e, g, cfg.kernel);
    }
    d2_mean /= 10.0;
    CHECK(d2_mean <= 2.0 * floor);
}

TEST_CASE("expert_self_discrepancy is zero on duplicated data and shrinks with L") {
    Rng rng(59);
    EventSequence base = tiny_expert(rng, 1)[0];
    std::vector<EventSequence> duplicated(16, base);
    TrainConfig cfg;
    cfg.batch_expert = 8;
    CHECK(expert_self_discrepancy(duplicated, cfg) == doctest::Approx(0.0).epsilon(1e-12));

    // homogeneous splits: positive, and smaller for larger L
    auto make_poisson = [&](int n) {
        std::vector<EventSequence> out;
        for (int s = 0; s < n; ++s) {
            EventSequence seq;
            seq.horizon = 2.0;
            double t = 0.0;
            while (true) {
                t += rng.exponential(4.0);
                if (t >= 2.0) break;
                seq.events.push_back({t, {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}});
            }
            out.push_back(seq);
        }
        return out;
    };
    const auto data = make_poisson(128);
    TrainConfig small;
    small.batch_expert = 8;
    TrainConfig large;
    large.batch_expert = 64;
    const double d_small = expert_self_discrepancy(data, small);
    const double d_large = expert_self_discrepancy(data, large);
    CHECK(d_small > 0.0);
    CHECK(d_large > 0.0);
    CHECK(d_large < d_small);

    TrainConfig too_big;
    too_big.batch_expert = 65;
    CHECK_THROWS_AS(expert_self_discrepancy(data, too_big), std::invalid_argument);
}

}  // TEST_SUITE
