#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "stpp/events.hpp"
#include "stpp/recurrent.hpp"

namespace stpp {

// Likelihood-trained comparator: the same recurrent embedding as the
// generator, but events drawn from a prespecified conditional density with
// exponential inter-arrival times and a diagonal Gaussian location. Heads map
// the hidden state through softplus so rate and variances stay positive.
struct BaselineParams {
    RecurrentCell cell;
    Eigen::VectorXd w_rate;   // hidden
    double b_rate = 0.0;
    Eigen::MatrixXd W_mean;   // 2 x hidden
    Eigen::Vector2d b_mean = Eigen::Vector2d::Zero();
    Eigen::MatrixXd W_var;    // 2 x hidden
    Eigen::Vector2d b_var = Eigen::Vector2d::Zero();

    Eigen::Index parameter_count() const;
    Eigen::VectorXd flatten() const;
    void assign_from_flat(const Eigen::VectorXd& flat);
};

BaselineParams make_baseline(RecurrentMode mode, int hidden);
BaselineParams init_baseline(RecurrentMode mode, int hidden, std::uint64_t seed);

struct BaselineHeads {
    double rate = 0.0;                                  // lambda > 0
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();     // mu
    Eigen::Vector2d variance = Eigen::Vector2d::Zero(); // diagonal of Sigma, > 0
};

BaselineHeads baseline_heads(const BaselineParams& params, const Eigen::VectorXd& h);

// log of Exp(delta_t | lambda(h)) * N(location | mu(h), diag Sigma(h)).
double cond_log_density(const BaselineParams& params, const HiddenState& state, double delta_t,
                        const Eigen::Vector2d& location);

// Sum of conditional log densities along the sequence plus the survival term
// -lambda_last * (T - t_n) for the event-free tail.
double sequence_log_likelihood(const BaselineParams& params, const EventSequence& seq);

// Gradient of sequence_log_likelihood in the flattened parameter order.
Eigen::VectorXd sequence_log_likelihood_grad(const BaselineParams& params,
                                             const EventSequence& seq);

struct BaselineFitConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch = 32;
    int iterations = 500;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;
    int threads = 0;
};

struct BaselineFitReport {
    std::vector<double> nll_trace;  // mean per-sequence negative log-likelihood
    BaselineParams params;
    std::uint64_t seed = 0;
};

// Maximizes the mean sequence log-likelihood by Adam on the exact pathwise
// gradient. Aborts with a diagnostic when the loss becomes non-finite.
BaselineFitReport fit_mle(const std::vector<EventSequence>& data, const BaselineFitConfig& cfg,
                          const BaselineParams& init);

// Draws delta_t ~ Exp(lambda(h)) and location ~ N(mu(h), Sigma(h)) per step
// under the same horizon/stopping contract as the generator rollout. The
// feature vector is accepted for interface parity but does not enter the
// density, whose parameters depend on the hidden state only.
EventSequence sample_baseline(const BaselineParams& params, const StaticFeatures& features,
                              double horizon, std::uint64_t seed);

}  // namespace stpp
