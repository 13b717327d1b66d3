#include "stpp/hawkes.hpp"

#include <cmath>
#include <stdexcept>

#include "stpp/parallel.hpp"
#include "stpp/rng.hpp"

namespace stpp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
// Proposal draws beyond this many sigmas are rejected; the lost Gaussian mass
// is below 1e-8 and is ignored by the acceptance weights.
constexpr double kSpatialTruncation = 6.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Gaussian mass of N(center, sigma^2 I) inside the region.
double mass_in_region(const Eigen::Vector2d& center, double sigma, const SpaceRegion& region) {
    const double mx = normal_cdf((region.max.x() - center.x()) / sigma) -
                      normal_cdf((region.min.x() - center.x()) / sigma);
    const double my = normal_cdf((region.max.y() - center.y()) / sigma) -
                      normal_cdf((region.min.y() - center.y()) / sigma);
    return mx * my;
}

void check_model(const TriggeringModel& model) {
    if (!(model.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!(model.region.min.x() < model.region.max.x()) ||
        !(model.region.min.y() < model.region.max.y())) {
        throw std::invalid_argument("region bounds must satisfy min < max per axis");
    }
    if (model.trigger.weight < 0.0 || !(model.trigger.decay > 0.0) ||
        !(model.trigger.sigma > 0.0)) {
        throw std::invalid_argument("triggering kernel parameters out of range");
    }
    if (model.base.kind == BaseRate::Kind::constant) {
        if (model.base.value < 0.0) throw std::invalid_argument("base rate must be nonnegative");
    } else {
        if (model.base.cells.size() == 0 || (model.base.cells.array() < 0.0).any()) {
            throw std::invalid_argument("base rate grid must be nonempty and nonnegative");
        }
    }
}

struct GridSampler {
    // Flattened cumulative cell masses for location draws from a grid base rate.
    std::vector<double> cumulative;
    double total = 0.0;
};

GridSampler build_grid_sampler(const TriggeringModel& model) {
    GridSampler gs;
    if (model.base.kind != BaseRate::Kind::grid) return gs;
    const Eigen::MatrixXd& cells = model.base.cells;
    const double cell_area = model.region.area() / static_cast<double>(cells.size());
    gs.cumulative.reserve(static_cast<std::size_t>(cells.size()));
    for (Eigen::Index i = 0; i < cells.rows(); ++i) {
        for (Eigen::Index j = 0; j < cells.cols(); ++j) {
            gs.total += cells(i, j) * cell_area;
            gs.cumulative.push_back(gs.total);
        }
    }
    return gs;
}

Eigen::Vector2d draw_base_location(const TriggeringModel& model, const GridSampler& gs, Rng& rng) {
    const SpaceRegion& region = model.region;
    if (model.base.kind == BaseRate::Kind::constant) {
        return {rng.uniform(region.min.x(), region.max.x()),
                rng.uniform(region.min.y(), region.max.y())};
    }
    const double r = rng.uniform01() * gs.total;
    std::size_t lo = 0, hi = gs.cumulative.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (gs.cumulative[mid] <= r) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    const Eigen::Index cols = model.base.cells.cols();
    const Eigen::Index ci = static_cast<Eigen::Index>(lo) / cols;
    const Eigen::Index cj = static_cast<Eigen::Index>(lo) % cols;
    const double wx = (region.max.x() - region.min.x()) / static_cast<double>(model.base.cells.rows());
    const double wy = (region.max.y() - region.min.y()) / static_cast<double>(cols);
    return {region.min.x() + (static_cast<double>(ci) + rng.uniform01()) * wx,
            region.min.y() + (static_cast<double>(cj) + rng.uniform01()) * wy};
}

Eigen::Vector2d draw_offspring_location(const Eigen::Vector2d& parent, double sigma,
                                        const SpaceRegion& region, Rng& rng) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double dx = sigma * rng.normal();
        const double dy = sigma * rng.normal();
        if (std::abs(dx) > kSpatialTruncation * sigma || std::abs(dy) > kSpatialTruncation * sigma) {
            continue;
        }
        const Eigen::Vector2d u = parent + Eigen::Vector2d(dx, dy);
        if (region.contains(u)) return u;
    }
    throw std::runtime_error("offspring location sampling failed to land in the region");
}

}  // namespace

BaseRate BaseRate::constant(double v) {
    BaseRate b;
    b.kind = Kind::constant;
    b.value = v;
    return b;
}

BaseRate BaseRate::grid(const Eigen::MatrixXd& cells) {
    BaseRate b;
    b.kind = Kind::grid;
    b.cells = cells;
    return b;
}

double TriggeringKernel::operator()(const Eigen::Vector2d& du, double dt) const {
    if (dt < 0.0) return 0.0;
    const double temporal = weight * decay * std::exp(-decay * dt);
    const double spatial = std::exp(-du.squaredNorm() / (2.0 * sigma * sigma)) /
                           (kTwoPi * sigma * sigma);
    return temporal * spatial;
}

double TriggeringModel::base_rate_at(const Eigen::Vector2d& u) const {
    if (base.kind == BaseRate::Kind::constant) return base.value;
    if (!region.contains(u)) return 0.0;
    const Eigen::Index nx = base.cells.rows();
    const Eigen::Index ny = base.cells.cols();
    const double fx = (u.x() - region.min.x()) / (region.max.x() - region.min.x());
    const double fy = (u.y() - region.min.y()) / (region.max.y() - region.min.y());
    const Eigen::Index ix = std::min(static_cast<Eigen::Index>(fx * static_cast<double>(nx)), nx - 1);
    const Eigen::Index iy = std::min(static_cast<Eigen::Index>(fy * static_cast<double>(ny)), ny - 1);
    return base.cells(ix, iy);
}

double TriggeringModel::base_total() const {
    if (base.kind == BaseRate::Kind::constant) return base.value * region.area();
    const double cell_area = region.area() / static_cast<double>(base.cells.size());
    return base.cells.sum() * cell_area;
}

double intensity(const TriggeringModel& model, const EventSequence& history, double t,
                 const Eigen::Vector2d& u) {
    check_model(model);
    if (!history.events.empty() && t < history.events.back().time) {
        throw std::invalid_argument("intensity query time precedes the history");
    }
    double lambda = model.base_rate_at(u);
    for (const Event& e : history.events) {
        if (e.time < t) lambda += model.trigger(u - e.location, t - e.time);
    }
    return lambda;
}

EventSequence simulate(const TriggeringModel& model, std::uint64_t seed) {
    check_model(model);
    if (model.trigger.weight >= 1.0) {
        throw std::invalid_argument("simulate requires a subcritical model (weight < 1)");
    }
    const GridSampler gs = build_grid_sampler(model);
    const double base_total = model.base_total();
    const double a0 = model.trigger.weight;
    const double omega = model.trigger.decay;
    const double sigma = model.trigger.sigma;

    Rng rng(seed);
    EventSequence seq;
    seq.horizon = model.horizon;
    std::vector<double> masses;  // in-region Gaussian mass per past event

    double t = 0.0;
    while (true) {
        // Dominating rate: left limit of the space-integrated intensity at t,
        // with every offspring kernel counted at full (uncensored) mass.
        double bound = base_total;
        for (const Event& e : seq.events) bound += a0 * omega * std::exp(-omega * (t - e.time));
        if (!(bound > 0.0)) break;

        const double wait = rng.exponential(bound);
        const double t_cand = t + wait;
        if (!(t_cand < model.horizon)) break;

        double total = base_total;
        std::vector<double> contribution(seq.events.size());
        for (std::size_t i = 0; i < seq.events.size(); ++i) {
            contribution[i] =
                a0 * omega * std::exp(-omega * (t_cand - seq.events[i].time)) * masses[i];
            total += contribution[i];
        }
        if (total > bound * (1.0 + 1e-9)) {
            throw std::logic_error("thinning bound violated");
        }

        t = t_cand;
        if (rng.uniform01() * bound >= total) continue;  // rejected proposal

        // Component selection by contribution, then the spatial draw.
        Eigen::Vector2d location;
        double r = rng.uniform01() * total;
        if (r < base_total) {
            location = draw_base_location(model, gs, rng);
        } else {
            r -= base_total;
            std::size_t pick = seq.events.size() - 1;
            for (std::size_t i = 0; i < contribution.size(); ++i) {
                if (r < contribution[i]) {
                    pick = i;
                    break;
                }
                r -= contribution[i];
            }
            location = draw_offspring_location(seq.events[pick].location, sigma, model.region, rng);
        }
        seq.events.push_back({t, location});
        masses.push_back(mass_in_region(location, sigma, model.region));
    }
    return seq;
}

std::vector<EventSequence> simulate_many(const TriggeringModel& model, int count,
                                         std::uint64_t seed, int threads) {
    if (count < 0) throw std::invalid_argument("count must be nonnegative");
    std::vector<EventSequence> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), threads, [&](std::size_t i) {
        out[i] = simulate(model, derive_seed(seed, 0x51a3, i));
    });
    return out;
}

EmpiricalIntensity empirical_intensity(const std::vector<EventSequence>& sequences,
                                       int time_bins, int space_bins, const SpaceRegion& region) {
    if (sequences.empty()) throw std::invalid_argument("empirical_intensity: no sequences");
    if (time_bins < 1 || space_bins < 1) {
        throw std::invalid_argument("empirical_intensity: bin counts must be >= 1");
    }
    const double horizon = sequences.front().horizon;
    for (const EventSequence& seq : sequences) {
        if (std::abs(seq.horizon - horizon) > 1e-9 * std::max(1.0, std::abs(horizon))) {
            throw std::invalid_argument("empirical_intensity: sequences must share one horizon");
        }
    }
    if (!(horizon > 0.0) || region.area() <= 0.0) {
        throw std::invalid_argument("empirical_intensity: zero-width bins");
    }

    EmpiricalIntensity out;
    out.horizon = horizon;
    out.region = region;
    out.n_sequences = sequences.size();
    out.time_counts = Eigen::VectorXd::Zero(time_bins);
    out.space_counts = Eigen::MatrixXd::Zero(space_bins, space_bins);
    out.cube_counts.assign(static_cast<std::size_t>(time_bins),
                           Eigen::MatrixXd::Zero(space_bins, space_bins));

    const double dt = horizon / static_cast<double>(time_bins);
    const double wx = (region.max.x() - region.min.x()) / static_cast<double>(space_bins);
    const double wy = (region.max.y() - region.min.y()) / static_cast<double>(space_bins);
    for (const EventSequence& seq : sequences) {
        for (const Event& e : seq.events) {
            ++out.n_events;
            const int ti = std::min(static_cast<int>(e.time / dt), time_bins - 1);
            out.time_counts[ti] += 1.0;
            if (!region.contains(e.location)) {
                ++out.n_events_outside;
                continue;
            }
            const int xi = std::min(static_cast<int>((e.location.x() - region.min.x()) / wx),
                                    space_bins - 1);
            const int yi = std::min(static_cast<int>((e.location.y() - region.min.y()) / wy),
                                    space_bins - 1);
            out.space_counts(xi, yi) += 1.0;
            out.cube_counts[static_cast<std::size_t>(ti)](xi, yi) += 1.0;
        }
    }

    const double n_seq = static_cast<double>(out.n_sequences);
    const double cell_area = wx * wy;
    out.time_density = out.time_counts / (n_seq * dt);
    out.space_density = out.space_counts / (n_seq * cell_area);
    out.cube_density.reserve(out.cube_counts.size());
    for (const Eigen::MatrixXd& m : out.cube_counts) {
        out.cube_density.push_back(m / (n_seq * dt * cell_area));
    }
    return out;
}

}  // namespace stpp
