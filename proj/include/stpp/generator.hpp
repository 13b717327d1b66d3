#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "stpp/events.hpp"
#include "stpp/recurrent.hpp"
#include "stpp/rng.hpp"

namespace stpp {

struct GeneratorDims {
    int hidden = 64;      // recurrent state size
    int mlp_hidden = 32;  // emission MLP hidden layer
    int noise = 10;       // noise vector length
    int features = 0;     // static feature length (0 when unused)
};

// All learnable weights of the recurrent embedding plus the emission MLP.
// The emission maps [h; z; f] -> (delta_t, x, y) with an inner tanh layer;
// the time output passes through softplus so inter-arrival times stay
// strictly positive, locations are left unbounded.
struct GeneratorParams {
    RecurrentCell cell;
    GeneratorDims dims;
    Eigen::MatrixXd H1;  // mlp_hidden x (hidden + noise + features)
    Eigen::VectorXd U1;  // mlp_hidden
    Eigen::MatrixXd H2;  // 3 x mlp_hidden
    Eigen::VectorXd U2;  // 3

    Eigen::Index parameter_count() const;
    Eigen::VectorXd flatten() const;
    void assign_from_flat(const Eigen::VectorXd& flat);
};

GeneratorParams make_generator(RecurrentMode mode, const GeneratorDims& dims);
GeneratorParams init_generator(RecurrentMode mode, const GeneratorDims& dims, std::uint64_t seed);
GeneratorParams zeros_like(const GeneratorParams& params);

struct Emission {
    double delta_t = 0.0;
    Eigen::Vector2d location = Eigen::Vector2d::Zero();
};

// One recurrent update from the previous event (absolute time, x, y).
HiddenState rnn_step(const GeneratorParams& params, const Eigen::Vector3d& prev_event,
                     const HiddenState& state);

// Emits the next inter-arrival time and location from state, noise and
// features. noise must lie in [0,1]^m.
Emission emit_event(const GeneratorParams& params, const HiddenState& state,
                    const Eigen::VectorXd& noise, const StaticFeatures& features);

// A full free-running generation with everything needed to replay it exactly.
struct RolloutTrace {
    EventSequence sequence;
    std::vector<Eigen::VectorXd> noises;  // one per kept event
    std::vector<HiddenState> states;      // state after feeding each kept event
};

// Free-running generation from the zero state: alternates emit_event and
// rnn_step, accumulating absolute times from 0 until the next time would
// reach the horizon (that event is discarded). Deterministic in
// (params, features, horizon, seed).
RolloutTrace rollout(const GeneratorParams& params, const StaticFeatures& features,
                     double horizon, std::uint64_t seed);

// Replays the emission/update recurrence for exactly noises.size() steps with
// the given noise draws; no horizon stopping. Used for exact-gradient replay
// and finite-difference checks.
EventSequence rollout_with_noise(const GeneratorParams& params, const StaticFeatures& features,
                                 const std::vector<Eigen::VectorXd>& noises, double horizon);

// Feeds the observed history through the recurrent cell, then generates
// exactly n_events future events, feeding each prediction back.
EventSequence condition_and_predict(const GeneratorParams& params, const EventSequence& history,
                                    const StaticFeatures& features, int n_events,
                                    std::uint64_t seed);

// Feeds the history, then continues free-running until the horizon. The
// returned sequence contains only the newly generated events.
EventSequence rollout_from(const GeneratorParams& params, const EventSequence& history,
                           const StaticFeatures& features, double horizon, std::uint64_t seed);

}  // namespace stpp
