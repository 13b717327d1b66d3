#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stpp/events.hpp"
#include "stpp/generator.hpp"

namespace stpp {

// Gregorian date helpers; day numbers count from 1970-01-01.
long long days_from_civil(int year, int month, int day);
long long parse_date(const std::string& iso);  // "YYYY-MM-DD"
std::string format_date(long long days);

// One county's cumulative confirmed-case series. Day indices are relative to
// the dataset anchor (the first reported date column).
struct CountyRecord {
    std::string fips;
    double lat = 0.0;
    double lon = 0.0;
    double population = 0.0;
    std::optional<int> lockdown_day;       // relative to the anchor
    std::vector<long long> cumulative;     // nondecreasing, one entry per day

    long long total_cases() const { return cumulative.empty() ? 0 : cumulative.back(); }
};

struct CountyDataset {
    long long anchor_day = 0;  // absolute day number of the first data column
    std::vector<CountyRecord> records;
};

// Wide CSV, one row per county:
// fips,lat,lon,population,lockdown_date,YYYY-MM-DD,... (cumulative columns).
// An empty lockdown_date marks a county without a recorded lockdown.
CountyDataset read_county_csv(const std::filesystem::path& path);
void write_county_csv(const std::filesystem::path& path, const CountyDataset& dataset);

enum class Aggregation { per_case, per_hundred };

// Turns the cumulative series into an event sequence in raw day coordinates:
// per_case emits one event per unit increment, per_hundred one event per new
// multiple of one hundred. Event times get uniform jitter within their
// reporting day (seeded), locations are the county centroid (lat, lon).
EventSequence counts_to_events(const CountyRecord& rec, Aggregation aggregation,
                               std::uint64_t seed);

inline constexpr int kCountyFeatureCount = 4;
extern const std::vector<std::string> kCountyFeatureSchema;

// [log10(population), scaled lockdown day (-1 when absent), scaled lat, scaled lon]
StaticFeatures build_features(const CountyRecord& rec, const ScalingTransform& scaling);

// Sequence-length buckets: [0, b1], (b1, b2], ..., (bk, inf).
struct GroupSpec {
    std::vector<long long> upper_bounds = {100, 1000, 5000, 10000, 20000};

    std::size_t bucket_count() const { return upper_bounds.size() + 1; }
    std::size_t bucket_of(long long length) const;
    std::string bucket_name(std::size_t bucket) const;
};

// Assigns each county to exactly one bucket by its per-case sequence length
// (total cumulative count). Returns record indices per bucket.
std::vector<std::vector<std::size_t>> group_counties(const std::vector<CountyRecord>& records,
                                                     const GroupSpec& spec);

struct ScenarioSpec {
    int shift_days = 0;           // lockdown shift (negative = earlier)
    int rollouts = 10;            // R
    int end_day = 0;              // target day index, inclusive
    std::optional<int> condition_until_day;  // feed observed events before this day
};

struct ScenarioReport {
    std::string county;
    int shift_days = 0;
    int rollouts = 0;
    double final_mean = 0.0;
    double final_std = 0.0;  // population standard deviation over rollouts
    std::vector<int> days;
    std::vector<std::vector<double>> trajectories;  // per rollout, cumulative cases per day
};

// Replaces the lockdown feature by its shifted value, runs R seeded rollouts
// to the end day, and reports cumulative-count trajectories with the mean and
// standard deviation of the final count. Requires a checkpoint whose feature
// schema includes the lockdown entry.
ScenarioReport run_scenario(const GeneratorParams& params, const ScalingTransform& scaling,
                            const std::vector<std::string>& feature_schema, int event_unit,
                            const CountyRecord& rec, const ScenarioSpec& scenario,
                            std::uint64_t seed);

std::string scenario_report_to_json(const ScenarioReport& report, const std::string& end_date);

}  // namespace stpp
