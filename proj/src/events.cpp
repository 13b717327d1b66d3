#include "stpp/events.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stpp {

namespace {

std::string describe(SequenceViolation::Kind kind, std::size_t index) {
    switch (kind) {
        case SequenceViolation::Kind::bad_horizon:
            return "horizon must be finite and positive";
        case SequenceViolation::Kind::nonfinite_time:
            return "non-finite event time at index " + std::to_string(index);
        case SequenceViolation::Kind::negative_time:
            return "negative event time at index " + std::to_string(index);
        case SequenceViolation::Kind::nonfinite_location:
            return "non-finite event location at index " + std::to_string(index);
        case SequenceViolation::Kind::duplicate_time:
            return "duplicate event time at index " + std::to_string(index);
        case SequenceViolation::Kind::non_increasing_time:
            return "decreasing event time at index " + std::to_string(index);
        case SequenceViolation::Kind::horizon_exceeded:
            return "event time at index " + std::to_string(index) + " is not below the horizon";
    }
    return "unknown violation";
}

SequenceViolation make_violation(SequenceViolation::Kind kind, std::size_t index) {
    return {kind, index, describe(kind, index)};
}

}  // namespace

std::optional<SequenceViolation> validate_sequence(const EventSequence& seq) {
    using Kind = SequenceViolation::Kind;
    if (!std::isfinite(seq.horizon) || seq.horizon <= 0.0) {
        return make_violation(Kind::bad_horizon, 0);
    }
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const Event& e = seq.events[i];
        if (!std::isfinite(e.time)) return make_violation(Kind::nonfinite_time, i);
        if (e.time < 0.0) return make_violation(Kind::negative_time, i);
        if (!e.location.allFinite()) return make_violation(Kind::nonfinite_location, i);
        if (e.time == prev) return make_violation(Kind::duplicate_time, i);
        if (e.time < prev) return make_violation(Kind::non_increasing_time, i);
        if (e.time >= seq.horizon) return make_violation(Kind::horizon_exceeded, i);
        prev = e.time;
    }
    return std::nullopt;
}

EventSequence ScalingTransform::scale(const EventSequence& seq) const {
    EventSequence out;
    out.events.reserve(seq.events.size());
    for (const Event& e : seq.events) out.events.push_back(scale(e));
    out.horizon = scale_time(seq.horizon);
    out.features = seq.features;
    return out;
}

EventSequence ScalingTransform::unscale(const EventSequence& seq) const {
    EventSequence out;
    out.events.reserve(seq.events.size());
    for (const Event& e : seq.events) out.events.push_back(unscale(e));
    out.horizon = unscale_time(seq.horizon);
    out.features = seq.features;
    return out;
}

ScalingTransform fit_scaling(const std::vector<EventSequence>& sequences,
                             std::vector<std::string>* warnings) {
    double t_min = std::numeric_limits<double>::infinity();
    double t_max = -std::numeric_limits<double>::infinity();
    Eigen::Vector2d u_min = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector2d u_max = Eigen::Vector2d::Constant(-std::numeric_limits<double>::infinity());
    std::size_t n_events = 0;
    for (const EventSequence& seq : sequences) {
        for (const Event& e : seq.events) {
            if (!std::isfinite(e.time) || !e.location.allFinite()) {
                throw std::invalid_argument("fit_scaling: non-finite event coordinates");
            }
            t_min = std::min(t_min, e.time);
            t_max = std::max(t_max, e.time);
            u_min = u_min.cwiseMin(e.location);
            u_max = u_max.cwiseMax(e.location);
            ++n_events;
        }
    }
    if (n_events == 0) {
        throw std::invalid_argument("fit_scaling: dataset contains no events");
    }

    ScalingTransform tf;
    if (t_max > t_min) {
        tf.time_offset = t_min;
        tf.time_scale = kScaledTimeMax / (t_max - t_min);
    } else {
        tf.time_offset = t_min;
        tf.time_scale = 1.0;
        if (warnings) warnings->push_back("degenerate time axis: all event times equal");
    }
    for (int axis = 0; axis < 2; ++axis) {
        if (u_max[axis] > u_min[axis]) {
            tf.space_offset[axis] = 0.5 * (u_min[axis] + u_max[axis]);
            tf.space_scale[axis] = 2.0 * kScaledSpaceHalf / (u_max[axis] - u_min[axis]);
        } else {
            tf.space_offset[axis] = u_min[axis];
            tf.space_scale[axis] = 1.0;
            if (warnings) {
                warnings->push_back(std::string("degenerate space axis ") +
                                    (axis == 0 ? "x" : "y") + ": all coordinates equal");
            }
        }
    }
    return tf;
}

}  // namespace stpp
