#include "stpp/recurrent.hpp"

#include <stdexcept>

namespace stpp {

namespace {

void fill_uniform(Eigen::MatrixXd& m, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            m(i, j) = rng.uniform(-bound, bound);
        }
    }
}

void check_dims(const RecurrentCell& cell, const HiddenState& state) {
    if (state.h.size() != cell.hidden) {
        throw std::invalid_argument("hidden state size does not match cell");
    }
    if (cell.mode == RecurrentMode::lstm && state.c.size() != cell.hidden) {
        throw std::invalid_argument("cell state size does not match lstm cell");
    }
}

}  // namespace

Eigen::Index RecurrentCell::parameter_count() const {
    if (mode == RecurrentMode::rnn) return V.size() + W.size() + B.size();
    return Wx.size() + Wh.size() + Wb.size();
}

RecurrentCell make_cell(RecurrentMode mode, int hidden) {
    if (hidden < 1) throw std::invalid_argument("hidden size must be positive");
    RecurrentCell cell;
    cell.mode = mode;
    cell.hidden = hidden;
    if (mode == RecurrentMode::rnn) {
        cell.V = Eigen::MatrixXd::Zero(hidden, 3);
        cell.W = Eigen::MatrixXd::Zero(hidden, hidden);
        cell.B = Eigen::VectorXd::Zero(hidden);
    } else {
        cell.Wx = Eigen::MatrixXd::Zero(4 * hidden, 3);
        cell.Wh = Eigen::MatrixXd::Zero(4 * hidden, hidden);
        cell.Wb = Eigen::VectorXd::Zero(4 * hidden);
    }
    return cell;
}

void init_cell(RecurrentCell& cell, Rng& rng) {
    if (cell.mode == RecurrentMode::rnn) {
        fill_uniform(cell.V, rng);
        fill_uniform(cell.W, rng);
        cell.B.setZero();
    } else {
        fill_uniform(cell.Wx, rng);
        fill_uniform(cell.Wh, rng);
        cell.Wb.setZero();
    }
}

HiddenState initial_state(const RecurrentCell& cell) {
    HiddenState s;
    s.h = Eigen::VectorXd::Zero(cell.hidden);
    if (cell.mode == RecurrentMode::lstm) s.c = Eigen::VectorXd::Zero(cell.hidden);
    return s;
}

HiddenState cell_step(const RecurrentCell& cell, const Eigen::Vector3d& input,
                      const HiddenState& state) {
    CellStepCache cache;
    return cell_step_cached(cell, input, state, cache);
}

HiddenState cell_step_cached(const RecurrentCell& cell, const Eigen::Vector3d& input,
                             const HiddenState& state, CellStepCache& cache) {
    check_dims(cell, state);
    if (!input.allFinite()) throw std::invalid_argument("non-finite recurrent input");
    cache.input = input;
    cache.prev = state;
    HiddenState next;
    if (cell.mode == RecurrentMode::rnn) {
        next.h = (cell.V * input + cell.W * state.h + cell.B).array().tanh();
    } else {
        const int h = cell.hidden;
        const Eigen::VectorXd pre = cell.Wx * input + cell.Wh * state.h + cell.Wb;
        cache.gate_i = pre.segment(0, h).unaryExpr([](double v) { return logistic(v); });
        cache.gate_f = pre.segment(h, h).unaryExpr([](double v) { return logistic(v); });
        cache.gate_g = pre.segment(2 * h, h).array().tanh();
        cache.gate_o = pre.segment(3 * h, h).unaryExpr([](double v) { return logistic(v); });
        next.c = cache.gate_f.cwiseProduct(state.c) + cache.gate_i.cwiseProduct(cache.gate_g);
        cache.c_tanh = next.c.array().tanh();
        next.h = cache.gate_o.cwiseProduct(cache.c_tanh);
    }
    cache.next = next;
    return next;
}

CellBackward cell_backward(const RecurrentCell& cell, const CellStepCache& cache,
                           const HiddenState& incoming, RecurrentCell& grad) {
    CellBackward out;
    if (cell.mode == RecurrentMode::rnn) {
        // d/dpre of tanh(pre) with pre = V a + W h + B
        const Eigen::VectorXd d_pre =
            incoming.h.cwiseProduct((1.0 - cache.next.h.array().square()).matrix());
        grad.V.noalias() += d_pre * cache.input.transpose();
        grad.W.noalias() += d_pre * cache.prev.h.transpose();
        grad.B += d_pre;
        out.input_grad = cell.V.transpose() * d_pre;
        out.state_grad.h = cell.W.transpose() * d_pre;
    } else {
        const int h = cell.hidden;
        const Eigen::ArrayXd i = cache.gate_i.array();
        const Eigen::ArrayXd f = cache.gate_f.array();
        const Eigen::ArrayXd g = cache.gate_g.array();
        const Eigen::ArrayXd o = cache.gate_o.array();
        const Eigen::ArrayXd ct = cache.c_tanh.array();

        const Eigen::ArrayXd d_o = incoming.h.array() * ct;
        const Eigen::ArrayXd d_c = incoming.c.array() + incoming.h.array() * o * (1.0 - ct.square());
        const Eigen::ArrayXd d_f = d_c * cache.prev.c.array();
        const Eigen::ArrayXd d_i = d_c * g;
        const Eigen::ArrayXd d_g = d_c * i;

        Eigen::VectorXd d_pre(4 * h);
        d_pre.segment(0, h) = (d_i * i * (1.0 - i)).matrix();
        d_pre.segment(h, h) = (d_f * f * (1.0 - f)).matrix();
        d_pre.segment(2 * h, h) = (d_g * (1.0 - g.square())).matrix();
        d_pre.segment(3 * h, h) = (d_o * o * (1.0 - o)).matrix();

        grad.Wx.noalias() += d_pre * cache.input.transpose();
        grad.Wh.noalias() += d_pre * cache.prev.h.transpose();
        grad.Wb += d_pre;
        out.input_grad = cell.Wx.transpose() * d_pre;
        out.state_grad.h = cell.Wh.transpose() * d_pre;
        out.state_grad.c = (d_c * f).matrix();
    }
    return out;
}

}  // namespace stpp
