#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "stpp/events.hpp"

namespace stpp {

// Exogenous rate beta_0(u) in events per unit time per unit area: either a
// constant over the region or a piecewise-constant grid of cell rates.
struct BaseRate {
    enum class Kind { constant, grid };
    Kind kind = Kind::constant;
    double value = 1.0;       // constant mode
    Eigen::MatrixXd cells;    // grid mode: nx rows (x axis) by ny cols (y axis)

    static BaseRate constant(double v);
    static BaseRate grid(const Eigen::MatrixXd& cells);
};

// Triggering kernel g(du, dt) = weight * decay * exp(-decay dt) * N(du; 0, sigma^2 I).
// `weight` is the branching ratio: the expected number of direct offspring.
struct TriggeringKernel {
    double weight = 0.5;  // a0, must stay < 1 for subcriticality
    double decay = 1.0;   // omega > 0
    double sigma = 0.2;   // spatial standard deviation > 0

    double operator()(const Eigen::Vector2d& du, double dt) const;
};

// Ground-truth self-exciting model on [0, horizon) x region.
struct TriggeringModel {
    BaseRate base;
    TriggeringKernel trigger;
    double horizon = 2.0;
    SpaceRegion region;

    double base_rate_at(const Eigen::Vector2d& u) const;
    double base_total() const;  // integral of beta_0 over the region
};

// Conditional intensity beta_0(u) + sum_{t_i < t} g(u - u_i, t - t_i).
// Throws when t precedes any history event.
double intensity(const TriggeringModel& model, const EventSequence& history, double t,
                 const Eigen::Vector2d& u);

// Exact sampling by thinning: proposals from the decaying dominating rate,
// acceptance by the ratio of the space-integrated intensity to the bound, and
// the location drawn from the normalized spatial profile at the accepted
// time. Offspring mass outside the region is censored, so observed branching
// is slightly below `weight` near the boundary.
EventSequence simulate(const TriggeringModel& model, std::uint64_t seed);

std::vector<EventSequence> simulate_many(const TriggeringModel& model, int count,
                                         std::uint64_t seed, int threads = 0);

// Histogram summaries of a set of sequences sharing one horizon. Count grids
// hold raw event tallies; density grids divide by sequence count and bin
// measure, giving events/time, events/area and events/(time*area).
struct EmpiricalIntensity {
    double horizon = 0.0;
    SpaceRegion region;
    std::size_t n_sequences = 0;
    std::size_t n_events = 0;
    std::size_t n_events_outside = 0;  // events outside the spatial grid

    Eigen::VectorXd time_counts;             // n_time bins
    Eigen::MatrixXd space_counts;            // nx by ny
    std::vector<Eigen::MatrixXd> cube_counts;  // n_time entries of nx by ny

    Eigen::VectorXd time_density;
    Eigen::MatrixXd space_density;
    std::vector<Eigen::MatrixXd> cube_density;

    double time_bin_width() const { return horizon / static_cast<double>(time_counts.size()); }
    double cell_area() const {
        return region.area() / static_cast<double>(space_counts.rows() * space_counts.cols());
    }
};

EmpiricalIntensity empirical_intensity(const std::vector<EventSequence>& sequences,
                                       int time_bins, int space_bins, const SpaceRegion& region);

}  // namespace stpp
