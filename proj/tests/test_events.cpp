#include <doctest.h>

#include "stpp/events.hpp"
#include "stpp/rng.hpp"
#include "support/oracles.hpp"

using namespace stpp;

namespace {

EventSequence seq_of(std::initializer_list<double> times, double horizon) {
    EventSequence seq;
    seq.horizon = horizon;
    for (const double t : times) seq.events.push_back({t, {0.1 * t, -0.2 * t}});
    return seq;
}

}  // namespace

TEST_SUITE("events") {

TEST_CASE("fit_scaling maps a two-year day range onto [0, 2]") {
    EventSequence seq;
    seq.horizon = 731.0;
    for (int d = 0; d <= 730; ++d) seq.events.push_back({static_cast<double>(d), {1.0, 2.0}});
    const ScalingTransform tf = fit_scaling({seq});
    CHECK(tf.time_scale == doctest::Approx(2.0 / 730.0).epsilon(1e-12));
    CHECK(tf.scale_time(730.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(tf.scale_time(0.0) == doctest::Approx(0.0));
}

TEST_CASE("fit_scaling is identity-like on data already in the target box") {
    EventSequence seq;
    seq.horizon = 2.5;
    seq.events.push_back({0.0, {-2.0, -2.0}});
    seq.events.push_back({1.0, {0.0, 0.5}});
    seq.events.push_back({2.0, {2.0, 2.0}});
    const ScalingTransform tf = fit_scaling({seq});
    CHECK(tf.time_offset == doctest::Approx(0.0));
    CHECK(tf.time_scale == doctest::Approx(1.0));
    CHECK(tf.space_offset.x() == doctest::Approx(0.0));
    CHECK(tf.space_offset.y() == doctest::Approx(0.0));
    CHECK(tf.space_scale.x() == doctest::Approx(1.0));
    CHECK(tf.space_scale.y() == doctest::Approx(1.0));
}

TEST_CASE("fit_scaling sends a lat/lon box exactly onto the corners") {
    // Affine per axis: corners (40, -74) and (41, -73) must land on
    // (-2, -2) and (2, 2).
    EventSequence seq;
    seq.horizon = 10.0;
    seq.events.push_back({0.0, {40.0, -74.0}});
    seq.events.push_back({1.0, {41.0, -73.0}});
    const ScalingTransform tf = fit_scaling({seq});
    const Eigen::Vector2d lo = tf.scale_location({40.0, -74.0});
    const Eigen::Vector2d hi = tf.scale_location({41.0, -73.0});
    CHECK(lo.x() == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(lo.y() == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(hi.x() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(hi.y() == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("fit_scaling rejects an empty dataset and flags degenerate axes") {
    CHECK_THROWS_AS(fit_scaling({}), std::invalid_argument);
    CHECK_THROWS_AS(fit_scaling({EventSequence{}}), std::invalid_argument);

    EventSequence seq;
    seq.horizon = 5.0;
    seq.events.push_back({1.0, {3.0, 4.0}});
    seq.events.push_back({2.0, {3.0, 5.0}});
    std::vector<std::string> warnings;
    const ScalingTransform tf = fit_scaling({seq}, &warnings);
    REQUIRE(warnings.size() == 1);  // x axis degenerate
    CHECK(tf.space_scale.x() == 1.0);
    CHECK(tf.scale_location({3.0, 4.0}).x() == doctest::Approx(0.0));
}

TEST_CASE("validate_sequence reports the first violation") {
    CHECK_FALSE(validate_sequence(EventSequence{{}, 1.0, {}}).has_value());

    auto dup = seq_of({0.5, 0.5}, 1.0);
    auto v = validate_sequence(dup);
    REQUIRE(v.has_value());
    CHECK(v->kind == SequenceViolation::Kind::duplicate_time);
    CHECK(v->index == 1);

    auto beyond = seq_of({2.5}, 2.0);
    v = validate_sequence(beyond);
    REQUIRE(v.has_value());
    CHECK(v->kind == SequenceViolation::Kind::horizon_exceeded);

    auto disordered = seq_of({0.5, 0.2}, 1.0);
    v = validate_sequence(disordered);
    REQUIRE(v.has_value());
    CHECK(v->kind == SequenceViolation::Kind::non_increasing_time);

    EventSequence nan_loc = seq_of({0.5}, 1.0);
    nan_loc.events[0].location.x() = std::numeric_limits<double>::quiet_NaN();
    v = validate_sequence(nan_loc);
    REQUIRE(v.has_value());
    CHECK(v->kind == SequenceViolation::Kind::nonfinite_location);
}

TEST_CASE("scaling round-trips, preserves order, and keeps sequences valid") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        EventSequence raw;
        raw.horizon = 50.0 + rng.uniform01() * 100.0;
        double t = 0.0;
        const int n = 2 + static_cast<int>(rng.uniform01() * 40);
        for (int i = 0; i < n; ++i) {
            t += 0.01 + rng.uniform01();
            raw.events.push_back({t, {rng.uniform(-300.0, 300.0), rng.uniform(10.0, 60.0)}});
        }
        raw.horizon = std::max(raw.horizon, t + 1.0);
        REQUIRE_FALSE(validate_sequence(raw).has_value());

        const ScalingTransform tf = fit_scaling({raw});
        const EventSequence scaled = tf.scale(raw);
        CHECK_FALSE(validate_sequence(scaled).has_value());
        for (std::size_t i = 0; i < raw.events.size(); ++i) {
            CHECK(scaled.events[i].time >= -1e-12);
            CHECK(scaled.events[i].time <= 2.0 + 1e-12);
            CHECK(std::abs(scaled.events[i].location.x()) <= 2.0 + 1e-12);

            const Event back = tf.unscale(scaled.events[i]);
            CHECK(back.time == doctest::Approx(raw.events[i].time).epsilon(1e-12));
            CHECK(back.location.x() ==
                  doctest::Approx(raw.events[i].location.x()).epsilon(1e-12));
            CHECK(back.location.y() ==
                  doctest::Approx(raw.events[i].location.y()).epsilon(1e-12));
        }
        for (std::size_t i = 1; i < scaled.events.size(); ++i) {
            CHECK(scaled.events[i].time > scaled.events[i - 1].time);
        }
    }
}

}  // TEST_SUITE
