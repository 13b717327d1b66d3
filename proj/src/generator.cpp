#include "stpp/generator.hpp"

#include <stdexcept>

namespace stpp {

namespace {

// A runaway parameter setting can shrink inter-arrival times toward zero;
// cap the rollout length so training aborts with a diagnostic instead of
// exhausting memory.
constexpr std::size_t kMaxRolloutEvents = 200000;

void fill_uniform(Eigen::MatrixXd& m, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            m(i, j) = rng.uniform(-bound, bound);
        }
    }
}

Eigen::VectorXd draw_noise(int m, Rng& rng) {
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) z[i] = rng.uniform01();
    return z;
}

void check_features(const GeneratorParams& params, const StaticFeatures& features) {
    if (features.size() != params.dims.features) {
        throw std::invalid_argument("feature vector length does not match generator dims");
    }
}

}  // namespace

Eigen::Index GeneratorParams::parameter_count() const {
    return cell.parameter_count() + H1.size() + U1.size() + H2.size() + U2.size();
}

Eigen::VectorXd GeneratorParams::flatten() const {
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
    put(H1);
    put_v(U1);
    put(H2);
    put_v(U2);
    return flat;
}

void GeneratorParams::assign_from_flat(const Eigen::VectorXd& flat) {
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
    take(H1);
    take_v(U1);
    take(H2);
    take_v(U2);
}

GeneratorParams make_generator(RecurrentMode mode, const GeneratorDims& dims) {
    if (dims.hidden < 1 || dims.mlp_hidden < 1 || dims.noise < 1 || dims.features < 0) {
        throw std::invalid_argument("invalid generator dimensions");
    }
    GeneratorParams p;
    p.cell = make_cell(mode, dims.hidden);
    p.dims = dims;
    const int in = dims.hidden + dims.noise + dims.features;
    p.H1 = Eigen::MatrixXd::Zero(dims.mlp_hidden, in);
    p.U1 = Eigen::VectorXd::Zero(dims.mlp_hidden);
    p.H2 = Eigen::MatrixXd::Zero(3, dims.mlp_hidden);
    p.U2 = Eigen::VectorXd::Zero(3);
    return p;
}

GeneratorParams init_generator(RecurrentMode mode, const GeneratorDims& dims, std::uint64_t seed) {
    GeneratorParams p = make_generator(mode, dims);
    Rng rng(derive_seed(seed, 0x11d1));
    init_cell(p.cell, rng);
    fill_uniform(p.H1, rng);
    fill_uniform(p.H2, rng);
    return p;
}

GeneratorParams zeros_like(const GeneratorParams& params) {
    return make_generator(params.cell.mode, params.dims);
}

HiddenState rnn_step(const GeneratorParams& params, const Eigen::Vector3d& prev_event,
                     const HiddenState& state) {
    return cell_step(params.cell, prev_event, state);
}

Emission emit_event(const GeneratorParams& params, const HiddenState& state,
                    const Eigen::VectorXd& noise, const StaticFeatures& features) {
    check_features(params, features);
    if (noise.size() != params.dims.noise) {
        throw std::invalid_argument("noise vector length does not match generator dims");
    }
    if (state.h.size() != params.dims.hidden) {
        throw std::invalid_argument("hidden state size does not match generator dims");
    }
    Eigen::VectorXd x(params.dims.hidden + params.dims.noise + params.dims.features);
    x << state.h, noise, features;
    const Eigen::VectorXd a1 = (params.H1 * x + params.U1).array().tanh();
    const Eigen::Vector3d o = params.H2 * a1 + params.U2;
    Emission out;
    out.delta_t = softplus(o[0]);
    out.location = {o[1], o[2]};
    return out;
}

RolloutTrace rollout(const GeneratorParams& params, const StaticFeatures& features,
                     double horizon, std::uint64_t seed) {
    check_features(params, features);
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    Rng rng(seed);
    RolloutTrace trace;
    trace.sequence.horizon = horizon;

    HiddenState state = initial_state(params.cell);
    double t = 0.0;
    while (true) {
        const Eigen::VectorXd z = draw_noise(params.dims.noise, rng);
        const Emission em = emit_event(params, state, z, features);
        const double t_next = t + em.delta_t;
        if (!(t_next < horizon)) break;  // overshoot event is discarded
        Event e{t_next, em.location};
        trace.sequence.events.push_back(e);
        trace.noises.push_back(z);
        state = cell_step(params.cell, e.as_vector(), state);
        trace.states.push_back(state);
        t = t_next;
        if (trace.sequence.events.size() > kMaxRolloutEvents) {
            throw std::runtime_error("rollout exceeded the event cap; parameters diverged");
        }
    }
    return trace;
}

EventSequence rollout_with_noise(const GeneratorParams& params, const StaticFeatures& features,
                                 const std::vector<Eigen::VectorXd>& noises, double horizon) {
    check_features(params, features);
    EventSequence seq;
    seq.horizon = horizon;
    HiddenState state = initial_state(params.cell);
    double t = 0.0;
    for (const Eigen::VectorXd& z : noises) {
        const Emission em = emit_event(params, state, z, features);
        t += em.delta_t;
        Event e{t, em.location};
        seq.events.push_back(e);
        state = cell_step(params.cell, e.as_vector(), state);
    }
    return seq;
}

namespace {

// Shared tail of condition_and_predict / rollout_from: generate from a state.
struct GenerationCursor {
    HiddenState state;
    double t = 0.0;
};

GenerationCursor feed_history(const GeneratorParams& params, const EventSequence& history) {
    GenerationCursor cur;
    cur.state = initial_state(params.cell);
    for (const Event& e : history.events) {
        cur.state = cell_step(params.cell, e.as_vector(), cur.state);
        cur.t = e.time;
    }
    return cur;
}

}  // namespace

EventSequence condition_and_predict(const GeneratorParams& params, const EventSequence& history,
                                    const StaticFeatures& features, int n_events,
                                    std::uint64_t seed) {
    check_features(params, features);
    if (n_events < 0) throw std::invalid_argument("n_events must be nonnegative");
    Rng rng(seed);
    GenerationCursor cur = feed_history(params, history);

    EventSequence out;
    out.horizon = history.horizon;
    for (int i = 0; i < n_events; ++i) {
        const Eigen::VectorXd z = draw_noise(params.dims.noise, rng);
        const Emission em = emit_event(params, cur.state, z, features);
        cur.t += em.delta_t;
        Event e{cur.t, em.location};
        out.events.push_back(e);
        cur.state = cell_step(params.cell, e.as_vector(), cur.state);
    }
    if (!out.events.empty()) {
        const double last = out.events.back().time;
        out.horizon = std::max(history.horizon, last + 1e-9 * std::max(1.0, std::abs(last)));
    }
    return out;
}

EventSequence rollout_from(const GeneratorParams& params, const EventSequence& history,
                           const StaticFeatures& features, double horizon, std::uint64_t seed) {
    check_features(params, features);
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    Rng rng(seed);
    GenerationCursor cur = feed_history(params, history);

    EventSequence out;
    out.horizon = horizon;
    while (true) {
        const Eigen::VectorXd z = draw_noise(params.dims.noise, rng);
        const Emission em = emit_event(params, cur.state, z, features);
        const double t_next = cur.t + em.delta_t;
        if (!(t_next < horizon)) break;
        Event e{t_next, em.location};
        out.events.push_back(e);
        cur.state = cell_step(params.cell, e.as_vector(), cur.state);
        cur.t = t_next;
        if (out.events.size() > kMaxRolloutEvents) {
            throw std::runtime_error("rollout exceeded the event cap; parameters diverged");
        }
    }
    return out;
}

}  // namespace stpp
