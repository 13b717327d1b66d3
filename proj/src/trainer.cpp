#include "stpp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "stpp/parallel.hpp"

namespace stpp {

namespace {

struct StepTape {
    Eigen::VectorXd x;   // [h_prev; z; f]
    Eigen::VectorXd a1;  // tanh layer output
    Eigen::Vector3d o;   // pre-softplus emission output
    double t = 0.0;      // absolute event time
    CellStepCache cell;
};

// Replays the rollout from its recorded noise, keeping every intermediate.
std::vector<StepTape> replay_forward(const GeneratorParams& params, const RolloutTrace& trace,
                                     const StaticFeatures& features) {
    const std::size_t n = trace.noises.size();
    if (trace.sequence.events.size() != n) {
        throw std::invalid_argument("trace noises and events are inconsistent");
    }
    std::vector<StepTape> tape(n);
    HiddenState state = initial_state(params.cell);
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        StepTape& st = tape[i];
        st.x.resize(params.dims.hidden + params.dims.noise + params.dims.features);
        st.x << state.h, trace.noises[i], features;
        st.a1 = (params.H1 * st.x + params.U1).array().tanh();
        st.o = params.H2 * st.a1 + params.U2;
        t += softplus(st.o[0]);
        st.t = t;
        const Event& recorded = trace.sequence.events[i];
        const Eigen::Vector3d a{t, st.o[1], st.o[2]};
        if (std::abs(recorded.time - t) > 1e-9 ||
            (recorded.location - Eigen::Vector2d(st.o[1], st.o[2])).cwiseAbs().maxCoeff() > 1e-9) {
            throw std::invalid_argument("trace does not replay to the same events under params");
        }
        state = cell_step_cached(params.cell, a, state, st.cell);
    }
    return tape;
}

std::vector<EventSequence> sample_expert_batch(const std::vector<EventSequence>& expert, int count,
                                               Rng& rng) {
    std::vector<EventSequence> batch;
    batch.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::size_t idx =
            static_cast<std::size_t>(rng.uniform01() * static_cast<double>(expert.size()));
        batch.push_back(expert[std::min(idx, expert.size() - 1)]);
    }
    return batch;
}

}  // namespace

GeneratorParams backprop_rollout(const GeneratorParams& params, const RolloutTrace& trace,
                                 const StaticFeatures& features,
                                 const Eigen::Matrix3Xd& event_grads) {
    const std::size_t n = trace.sequence.events.size();
    if (static_cast<std::size_t>(event_grads.cols()) != n) {
        throw std::invalid_argument("event gradient count does not match the trace");
    }
    GeneratorParams grad = zeros_like(params);
    if (n == 0) return grad;

    const std::vector<StepTape> tape = replay_forward(params, trace, features);
    const int h = params.dims.hidden;

    Eigen::VectorXd h_bar = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd c_bar = Eigen::VectorXd::Zero(h);
    double t_bar = 0.0;  // gradient flowing through the absolute-time chain
    for (std::size_t i = n; i-- > 0;) {
        const StepTape& st = tape[i];
        // The cell consumed a_i and produced the state used from step i+1 on.
        HiddenState incoming;
        incoming.h = h_bar;
        if (params.cell.mode == RecurrentMode::lstm) incoming.c = c_bar;
        const CellBackward cb = cell_backward(params.cell, st.cell, incoming, grad.cell);

        const Eigen::Vector3d a_bar = event_grads.col(static_cast<Eigen::Index>(i)) + cb.input_grad;
        const double t_total = a_bar[0] + t_bar;
        t_bar = t_total;  // t_i = t_{i-1} + delta_i

        Eigen::Vector3d o_bar;
        o_bar[0] = t_total * logistic(st.o[0]);  // softplus'(x) = logistic(x)
        o_bar[1] = a_bar[1];
        o_bar[2] = a_bar[2];

        grad.H2.noalias() += o_bar * st.a1.transpose();
        grad.U2 += o_bar;
        const Eigen::VectorXd a1_bar = params.H2.transpose() * o_bar;
        const Eigen::VectorXd pre_bar =
            a1_bar.cwiseProduct((1.0 - st.a1.array().square()).matrix());
        grad.H1.noalias() += pre_bar * st.x.transpose();
        grad.U1 += pre_bar;
        const Eigen::VectorXd x_bar = params.H1.transpose() * pre_bar;

        h_bar = cb.state_grad.h + x_bar.head(h);
        if (params.cell.mode == RecurrentMode::lstm) c_bar = cb.state_grad.c;
    }
    return grad;
}

TrainReport train(const std::vector<EventSequence>& expert, const TrainConfig& cfg,
                  const GeneratorParams& init) {
    if (expert.empty()) throw std::invalid_argument("train: expert dataset is empty");
    if (cfg.batch_expert < 1 || cfg.batch_learner < 1) {
        throw std::invalid_argument("train: batch sizes must be >= 1");
    }
    if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("train: bad learning rate");
    const double horizon = expert.front().horizon;
    for (const EventSequence& seq : expert) {
        if (std::abs(seq.horizon - horizon) > 1e-9 * std::max(1.0, std::abs(horizon))) {
            throw std::invalid_argument("train: expert sequences must share one horizon");
        }
        const bool has = seq.features.has_value();
        if (init.dims.features > 0 &&
            (!has || seq.features->size() != init.dims.features)) {
            throw std::invalid_argument("train: expert features do not match generator dims");
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    report.seed = cfg.seed;
    report.params = init;
    report.d2_trace.reserve(static_cast<std::size_t>(std::max(cfg.iterations, 0)));

    Eigen::VectorXd flat = report.params.flatten();
    Optimizer opt(cfg.optimizer, flat.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);
    const MmdEstimator estimator =
        cfg.unbiased_mmd ? MmdEstimator::unbiased : MmdEstimator::biased;
    const StaticFeatures no_features = StaticFeatures::Zero(0);

    const std::size_t M = static_cast<std::size_t>(cfg.batch_learner);
    for (int k = 0; k < cfg.iterations; ++k) {
        Rng iter_rng(derive_seed(cfg.seed, 0xba7c4, static_cast<std::uint64_t>(k)));
        EmbeddingBatch expert_batch{sample_expert_batch(expert, cfg.batch_expert, iter_rng),
                                    BatchRole::expert};

        // Rollouts are independent given their derived seeds; the reduction
        // below runs in index order so the result is schedule-invariant.
        std::vector<RolloutTrace> traces(M);
        std::vector<const StaticFeatures*> rollout_features(M, &no_features);
        if (report.params.dims.features > 0) {
            for (std::size_t m = 0; m < M; ++m) {
                rollout_features[m] =
                    &*expert_batch.sequences[m % expert_batch.sequences.size()].features;
            }
        }
        const GeneratorParams& params_k = report.params;
        parallel_for(M, cfg.threads, [&](std::size_t m) {
            traces[m] = rollout(params_k, *rollout_features[m], horizon,
                                derive_seed(cfg.seed, 0x011e7, static_cast<std::uint64_t>(k), m));
        });

        EmbeddingBatch learner_batch{{}, BatchRole::learner};
        learner_batch.sequences.reserve(M);
        for (const RolloutTrace& tr : traces) learner_batch.sequences.push_back(tr.sequence);

        const double d2 = mmd_squared(expert_batch, learner_batch, cfg.kernel, estimator);
        if (!std::isfinite(d2)) {
            throw std::runtime_error("train: discrepancy became non-finite at iteration " +
                                     std::to_string(k));
        }
        report.d2_trace.push_back(d2);

        const std::vector<Eigen::Matrix3Xd> event_grads =
            mmd_grad_events(expert_batch, learner_batch, cfg.kernel, estimator);
        std::vector<Eigen::VectorXd> partial(M);
        parallel_for(M, cfg.threads, [&](std::size_t m) {
            partial[m] =
                backprop_rollout(params_k, traces[m], *rollout_features[m], event_grads[m])
                    .flatten();
        });
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(flat.size());
        for (const Eigen::VectorXd& g : partial) grad += g;
        if (!grad.allFinite()) {
            throw std::runtime_error("train: gradient became non-finite at iteration " +
                                     std::to_string(k));
        }

        clip_global_norm(grad, cfg.clip_norm);
        opt.step(flat, grad);
        report.params.assign_from_flat(flat);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

double expert_self_discrepancy(const std::vector<EventSequence>& expert, const TrainConfig& cfg,
                               int resamples) {
    const int L = cfg.batch_expert;
    if (static_cast<int>(expert.size()) < 2 * L) {
        throw std::invalid_argument("expert_self_discrepancy: need at least 2L sequences");
    }
    if (resamples < 1) throw std::invalid_argument("resamples must be >= 1");
    Rng rng(derive_seed(cfg.seed, 0x5e1fd));
    std::vector<std::size_t> order(expert.size());
    double mean = 0.0;
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i-- > 1;) {
            const std::size_t j =
                static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i + 1));
            std::swap(order[i], order[std::min(j, i)]);
        }
        EmbeddingBatch a{{}, BatchRole::expert};
        EmbeddingBatch b{{}, BatchRole::learner};
        for (int i = 0; i < L; ++i) {
            a.sequences.push_back(expert[order[static_cast<std::size_t>(i)]]);
            b.sequences.push_back(expert[order[static_cast<std::size_t>(L + i)]]);
        }
        mean += mmd_squared(a, b, cfg.kernel,
                            cfg.unbiased_mmd ? MmdEstimator::unbiased : MmdEstimator::biased);
    }
    return mean / static_cast<double>(resamples);
}

Optimizer::Optimizer(OptimizerKind kind, Eigen::Index n, double lr, double beta1, double beta2,
                     double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (kind_ == OptimizerKind::adam) {
        m_ = Eigen::VectorXd::Zero(n);
        v_ = Eigen::VectorXd::Zero(n);
    }
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (kind_ == OptimizerKind::sgd) {
        params -= lr_ * grad;
        return;
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params -= (lr_ / bc1) *
              m_.cwiseQuotient(((v_ / bc2).cwiseSqrt().array() + eps_).matrix());
}

void clip_global_norm(Eigen::VectorXd& grad, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = grad.norm();
    if (norm > max_norm) grad *= max_norm / norm;
}

}  // namespace stpp
