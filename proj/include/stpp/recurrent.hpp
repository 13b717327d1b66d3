#pragma once

#include <Eigen/Core>
#include <cmath>

#include "stpp/rng.hpp"

namespace stpp {

inline double logistic(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Inverse of softplus for y > 0.
inline double inv_softplus(double y) { return std::log(std::expm1(y)); }

enum class RecurrentMode { lstm, rnn };

struct HiddenState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;  // cell state; empty in rnn mode
};

// One-layer recurrent cell over 3-vector inputs (t, x, y).
//   rnn:  h' = tanh(V a + W h + B)
//   lstm: standard single-layer update, gates stacked [input; forget; cell; output]
struct RecurrentCell {
    RecurrentMode mode = RecurrentMode::lstm;
    int hidden = 64;

    Eigen::MatrixXd V, W;   // rnn: hidden x 3, hidden x hidden
    Eigen::VectorXd B;      // rnn: hidden
    Eigen::MatrixXd Wx, Wh; // lstm: 4*hidden x 3, 4*hidden x hidden
    Eigen::VectorXd Wb;     // lstm: 4*hidden

    Eigen::Index parameter_count() const;
};

// Allocates a cell with zero weights.
RecurrentCell make_cell(RecurrentMode mode, int hidden);

// Weights i.i.d. uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
void init_cell(RecurrentCell& cell, Rng& rng);

HiddenState initial_state(const RecurrentCell& cell);
HiddenState cell_step(const RecurrentCell& cell, const Eigen::Vector3d& input,
                      const HiddenState& state);

// Forward intermediates needed for an exact reverse pass.
struct CellStepCache {
    Eigen::Vector3d input;
    HiddenState prev;
    HiddenState next;
    Eigen::VectorXd gate_i, gate_f, gate_g, gate_o;  // lstm, post-activation
    Eigen::VectorXd c_tanh;                          // lstm, tanh of new cell state
};

HiddenState cell_step_cached(const RecurrentCell& cell, const Eigen::Vector3d& input,
                             const HiddenState& state, CellStepCache& cache);

struct CellBackward {
    Eigen::Vector3d input_grad;
    HiddenState state_grad;  // gradient w.r.t. the previous (h, c)
};

// Reverse-mode step: incoming holds the objective gradient w.r.t. the step's
// output state; weight gradients accumulate into grad.
CellBackward cell_backward(const RecurrentCell& cell, const CellStepCache& cache,
                           const HiddenState& incoming, RecurrentCell& grad);

}  // namespace stpp
