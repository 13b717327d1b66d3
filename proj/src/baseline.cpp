#include "stpp/baseline.hpp"

#include <cmath>
#include <stdexcept>

#include "stpp/parallel.hpp"
#include "stpp/trainer.hpp"

namespace stpp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr std::size_t kMaxSampleEvents = 200000;

void fill_uniform(Eigen::MatrixXd& m, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            m(i, j) = rng.uniform(-bound, bound);
        }
    }
}

struct BaselineStepTape {
    HiddenState state;   // state the heads were evaluated at
    BaselineHeads heads;
    double pre_rate = 0.0;
    Eigen::Vector2d pre_var = Eigen::Vector2d::Zero();
    double delta_t = 0.0;
    Eigen::Vector2d location = Eigen::Vector2d::Zero();
    CellStepCache cell;  // update consuming this step's event
};

struct HeadEval {
    BaselineHeads heads;
    double pre_rate;
    Eigen::Vector2d pre_var;
};

HeadEval eval_heads(const BaselineParams& params, const Eigen::VectorXd& h) {
    HeadEval out;
    out.pre_rate = params.w_rate.dot(h) + params.b_rate;
    out.heads.rate = softplus(out.pre_rate);
    out.heads.mean = params.W_mean * h + params.b_mean;
    out.pre_var = params.W_var * h + params.b_var;
    out.heads.variance = {softplus(out.pre_var[0]), softplus(out.pre_var[1])};
    return out;
}

double step_log_density(const BaselineHeads& heads, double delta_t,
                        const Eigen::Vector2d& location) {
    const double log_time = std::log(heads.rate) - heads.rate * delta_t;
    double log_space = -kLog2Pi;
    for (int j = 0; j < 2; ++j) {
        const double diff = location[j] - heads.mean[j];
        log_space -= 0.5 * std::log(heads.variance[j]);
        log_space -= 0.5 * diff * diff / heads.variance[j];
    }
    return log_time + log_space;
}

// d(log density)/d(rate, mean, variance) for one step.
struct HeadGrad {
    double rate = 0.0;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d variance = Eigen::Vector2d::Zero();
};

HeadGrad step_log_density_grad(const BaselineHeads& heads, double delta_t,
                               const Eigen::Vector2d& location) {
    HeadGrad g;
    g.rate = 1.0 / heads.rate - delta_t;
    for (int j = 0; j < 2; ++j) {
        const double diff = location[j] - heads.mean[j];
        g.mean[j] = diff / heads.variance[j];
        g.variance[j] =
            -0.5 / heads.variance[j] + 0.5 * diff * diff / (heads.variance[j] * heads.variance[j]);
    }
    return g;
}

}  // namespace

Eigen::Index BaselineParams::parameter_count() const {
    return cell.parameter_count() + w_rate.size() + 1 + W_mean.size() + 2 + W_var.size() + 2;
}

Eigen::VectorXd BaselineParams::flatten() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index pos = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
        flat.segment(pos, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        pos += m.size();
    };
    auto put_v = [&](const Eigen::VectorXd& v) {
        flat.segment(pos, v.size()) = v;
        pos += v.size();
    };
    if (cell.mode == RecurrentMode::rnn) {
        put(cell.V);
        put(cell.W);
        put_v(cell.B);
    } else {
        put(cell.Wx);
        put(cell.Wh);
        put_v(cell.Wb);
    }
    put_v(w_rate);
    flat[pos++] = b_rate;
    put(W_mean);
    flat.segment(pos, 2) = b_mean;
    pos += 2;
    put(W_var);
    flat.segment(pos, 2) = b_var;
    pos += 2;
    return flat;
}

void BaselineParams::assign_from_flat(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("flat parameter vector has wrong length");
    }
    Eigen::Index pos = 0;
    auto take = [&](Eigen::MatrixXd& m) {
        m = Eigen::Map<const Eigen::MatrixXd>(flat.data() + pos, m.rows(), m.cols());
        pos += m.size();
    };
    auto take_v = [&](Eigen::VectorXd& v) {
        v = flat.segment(pos, v.size());
        pos += v.size();
    };
    if (cell.mode == RecurrentMode::rnn) {
        take(cell.V);
        take(cell.W);
        take_v(cell.B);
    } else {
        take(cell.Wx);
        take(cell.Wh);
        take_v(cell.Wb);
    }
    take_v(w_rate);
    b_rate = flat[pos++];
    take(W_mean);
    b_mean = flat.segment(pos, 2);
    pos += 2;
    take(W_var);
    b_var = flat.segment(pos, 2);
    pos += 2;
}

BaselineParams make_baseline(RecurrentMode mode, int hidden) {
    BaselineParams p;
    p.cell = make_cell(mode, hidden);
    p.w_rate = Eigen::VectorXd::Zero(hidden);
    p.W_mean = Eigen::MatrixXd::Zero(2, hidden);
    p.W_var = Eigen::MatrixXd::Zero(2, hidden);
    return p;
}

BaselineParams init_baseline(RecurrentMode mode, int hidden, std::uint64_t seed) {
    BaselineParams p = make_baseline(mode, hidden);
    Rng rng(derive_seed(seed, 0xba5e));
    init_cell(p.cell, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < p.w_rate.size(); ++i) p.w_rate[i] = rng.uniform(-bound, bound);
    fill_uniform(p.W_mean, rng);
    fill_uniform(p.W_var, rng);
    // Start near unit rate and unit variance so early likelihoods stay sane.
    p.b_rate = inv_softplus(1.0);
    p.b_var = Eigen::Vector2d::Constant(inv_softplus(1.0));
    return p;
}

BaselineHeads baseline_heads(const BaselineParams& params, const Eigen::VectorXd& h) {
    return eval_heads(params, h).heads;
}

double cond_log_density(const BaselineParams& params, const HiddenState& state, double delta_t,
                        const Eigen::Vector2d& location) {
    if (!(delta_t > 0.0)) throw std::invalid_argument("cond_log_density: delta_t must be > 0");
    if (!location.allFinite()) throw std::invalid_argument("cond_log_density: non-finite location");
    return step_log_density(eval_heads(params, state.h).heads, delta_t, location);
}

double sequence_log_likelihood(const BaselineParams& params, const EventSequence& seq) {
    if (const auto violation = validate_sequence(seq)) {
        throw std::invalid_argument("sequence_log_likelihood: " + violation->message);
    }
    HiddenState state = initial_state(params.cell);
    double t_prev = 0.0;
    double ll = 0.0;
    for (const Event& e : seq.events) {
        const HeadEval he = eval_heads(params, state.h);
        ll += step_log_density(he.heads, e.time - t_prev, e.location);
        state = cell_step(params.cell, e.as_vector(), state);
        t_prev = e.time;
    }
    const HeadEval tail = eval_heads(params, state.h);
    ll -= tail.heads.rate * (seq.horizon - t_prev);
    return ll;
}

Eigen::VectorXd sequence_log_likelihood_grad(const BaselineParams& params,
                                             const EventSequence& seq) {
    if (const auto violation = validate_sequence(seq)) {
        throw std::invalid_argument("sequence_log_likelihood_grad: " + violation->message);
    }
    const std::size_t n = seq.events.size();
    std::vector<BaselineStepTape> tape(n);
    HiddenState state = initial_state(params.cell);
    double t_prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Event& e = seq.events[i];
        BaselineStepTape& st = tape[i];
        st.state = state;
        const HeadEval he = eval_heads(params, state.h);
        st.heads = he.heads;
        st.pre_rate = he.pre_rate;
        st.pre_var = he.pre_var;
        st.delta_t = e.time - t_prev;
        st.location = e.location;
        state = cell_step_cached(params.cell, e.as_vector(), state, st.cell);
        t_prev = e.time;
    }
    const HeadEval tail = eval_heads(params, state.h);
    const double tail_gap = seq.horizon - t_prev;

    BaselineParams grad = make_baseline(params.cell.mode, params.cell.hidden);

    // Survival term -lambda(h_n) * (T - t_n).
    Eigen::VectorXd h_bar = Eigen::VectorXd::Zero(params.cell.hidden);
    Eigen::VectorXd c_bar = Eigen::VectorXd::Zero(params.cell.hidden);
    {
        const double d_pre = -tail_gap * logistic(tail.pre_rate);
        grad.w_rate += d_pre * state.h;
        grad.b_rate += d_pre;
        h_bar += d_pre * params.w_rate;
    }

    for (std::size_t i = n; i-- > 0;) {
        const BaselineStepTape& st = tape[i];
        HiddenState incoming;
        incoming.h = h_bar;
        if (params.cell.mode == RecurrentMode::lstm) incoming.c = c_bar;
        const CellBackward cb = cell_backward(params.cell, st.cell, incoming, grad.cell);
        // Event coordinates are data; their gradient is dropped.
        h_bar = cb.state_grad.h;
        if (params.cell.mode == RecurrentMode::lstm) c_bar = cb.state_grad.c;

        const HeadGrad hg = step_log_density_grad(st.heads, st.delta_t, st.location);
        const double d_pre_rate = hg.rate * logistic(st.pre_rate);
        grad.w_rate += d_pre_rate * st.state.h;
        grad.b_rate += d_pre_rate;
        h_bar += d_pre_rate * params.w_rate;

        grad.W_mean.noalias() += hg.mean * st.state.h.transpose();
        grad.b_mean += hg.mean;
        h_bar += params.W_mean.transpose() * hg.mean;

        Eigen::Vector2d d_pre_var;
        d_pre_var[0] = hg.variance[0] * logistic(st.pre_var[0]);
        d_pre_var[1] = hg.variance[1] * logistic(st.pre_var[1]);
        grad.W_var.noalias() += d_pre_var * st.state.h.transpose();
        grad.b_var += d_pre_var;
        h_bar += params.W_var.transpose() * d_pre_var;
    }
    return grad.flatten();
}

BaselineFitReport fit_mle(const std::vector<EventSequence>& data, const BaselineFitConfig& cfg,
                          const BaselineParams& init) {
    if (data.empty()) throw std::invalid_argument("fit_mle: dataset is empty");
    if (cfg.batch < 1) throw std::invalid_argument("fit_mle: batch must be >= 1");

    BaselineFitReport report;
    report.seed = cfg.seed;
    report.params = init;
    report.nll_trace.reserve(static_cast<std::size_t>(std::max(cfg.iterations, 0)));

    Eigen::VectorXd flat = report.params.flatten();
    Optimizer opt(OptimizerKind::adam, flat.size(), cfg.learning_rate, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps);

    const std::size_t B = static_cast<std::size_t>(cfg.batch);
    for (int k = 0; k < cfg.iterations; ++k) {
        Rng iter_rng(derive_seed(cfg.seed, 0xf17b, static_cast<std::uint64_t>(k)));
        std::vector<std::size_t> batch(B);
        for (std::size_t& idx : batch) {
            idx = std::min(
                static_cast<std::size_t>(iter_rng.uniform01() * static_cast<double>(data.size())),
                data.size() - 1);
        }

        const BaselineParams& params_k = report.params;
        std::vector<double> lls(B);
        std::vector<Eigen::VectorXd> grads(B);
        parallel_for(B, cfg.threads, [&](std::size_t b) {
            lls[b] = sequence_log_likelihood(params_k, data[batch[b]]);
            grads[b] = sequence_log_likelihood_grad(params_k, data[batch[b]]);
        });

        double nll = 0.0;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(flat.size());
        for (std::size_t b = 0; b < B; ++b) {
            nll -= lls[b];
            grad -= grads[b];
        }
        nll /= static_cast<double>(B);
        grad /= static_cast<double>(B);
        if (!std::isfinite(nll) || !grad.allFinite()) {
            throw std::runtime_error("fit_mle: loss became non-finite at iteration " +
                                     std::to_string(k));
        }
        report.nll_trace.push_back(nll);

        clip_global_norm(grad, cfg.clip_norm);
        opt.step(flat, grad);
        report.params.assign_from_flat(flat);
    }
    return report;
}

EventSequence sample_baseline(const BaselineParams& params, const StaticFeatures& features,
                              double horizon, std::uint64_t seed) {
    (void)features;
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    Rng rng(seed);
    EventSequence seq;
    seq.horizon = horizon;
    HiddenState state = initial_state(params.cell);
    double t = 0.0;
    while (true) {
        const BaselineHeads heads = eval_heads(params, state.h).heads;
        const double delta = rng.exponential(heads.rate);
        const double t_next = t + delta;
        if (!(t_next < horizon)) break;
        Eigen::Vector2d loc = heads.mean;
        loc[0] += std::sqrt(heads.variance[0]) * rng.normal();
        loc[1] += std::sqrt(heads.variance[1]) * rng.normal();
        Event e{t_next, loc};
        seq.events.push_back(e);
        state = cell_step(params.cell, e.as_vector(), state);
        t = t_next;
        if (seq.events.size() > kMaxSampleEvents) {
            throw std::runtime_error("sample_baseline exceeded the event cap");
        }
    }
    return seq;
}

}  // namespace stpp
