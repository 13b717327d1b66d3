#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace stpp {

// Scaled coordinate targets: times in [0, kScaledTimeMax], each spatial axis
// in [-kScaledSpaceHalf, +kScaledSpaceHalf].
inline constexpr double kScaledTimeMax = 2.0;
inline constexpr double kScaledSpaceHalf = 2.0;

struct Event {
    double time = 0.0;
    Eigen::Vector2d location = Eigen::Vector2d::Zero();

    Eigen::Vector3d as_vector() const { return {time, location.x(), location.y()}; }
};

using StaticFeatures = Eigen::VectorXd;

struct EventSequence {
    std::vector<Event> events;
    double horizon = 1.0;
    std::optional<StaticFeatures> features;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
};

struct SpaceRegion {
    Eigen::Vector2d min{-kScaledSpaceHalf, -kScaledSpaceHalf};
    Eigen::Vector2d max{kScaledSpaceHalf, kScaledSpaceHalf};

    double area() const { return (max.x() - min.x()) * (max.y() - min.y()); }
    bool contains(const Eigen::Vector2d& u) const {
        return u.x() >= min.x() && u.x() <= max.x() && u.y() >= min.y() && u.y() <= max.y();
    }
};

struct SequenceViolation {
    enum class Kind {
        bad_horizon,
        nonfinite_time,
        negative_time,
        nonfinite_location,
        duplicate_time,
        non_increasing_time,
        horizon_exceeded,
    };
    Kind kind = Kind::bad_horizon;
    std::size_t index = 0;  // offending event, when applicable
    std::string message;
};

// Reports the first violation of the sequence invariants, or nullopt when the
// sequence is valid. An empty sequence is valid.
std::optional<SequenceViolation> validate_sequence(const EventSequence& seq);

// Affine per-axis map between raw coordinates and the scaled training frame.
// time: scaled = (raw - time_offset) * time_scale
// space: scaled = (raw - space_offset) * space_scale, componentwise
struct ScalingTransform {
    double time_offset = 0.0;
    double time_scale = 1.0;
    Eigen::Vector2d space_offset = Eigen::Vector2d::Zero();
    Eigen::Vector2d space_scale = Eigen::Vector2d::Ones();

    double scale_time(double t) const { return (t - time_offset) * time_scale; }
    double unscale_time(double t) const { return t / time_scale + time_offset; }
    Eigen::Vector2d scale_location(const Eigen::Vector2d& u) const {
        return (u - space_offset).cwiseProduct(space_scale);
    }
    Eigen::Vector2d unscale_location(const Eigen::Vector2d& u) const {
        return u.cwiseQuotient(space_scale) + space_offset;
    }

    Event scale(const Event& e) const { return {scale_time(e.time), scale_location(e.location)}; }
    Event unscale(const Event& e) const {
        return {unscale_time(e.time), unscale_location(e.location)};
    }
    EventSequence scale(const EventSequence& seq) const;
    EventSequence unscale(const EventSequence& seq) const;
};

// Fits the affine map that sends the pooled event times to [0, kScaledTimeMax]
// and each spatial axis to [-kScaledSpaceHalf, +kScaledSpaceHalf]. A
// degenerate axis (all values equal) gets unit scale with centering and a
// warning appended to `warnings` when provided. Throws std::invalid_argument
// when the dataset contains no events.
ScalingTransform fit_scaling(const std::vector<EventSequence>& sequences,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace stpp
