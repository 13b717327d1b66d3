#include "stpp/covid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "stpp/rng.hpp"
#include "stpp/version.hpp"

namespace stpp {

const std::vector<std::string> kCountyFeatureSchema = {"log10_population", "lockdown_time",
                                                       "latitude", "longitude"};

long long days_from_civil(int year, int month, int day) {
    // Howard Hinnant's algorithm; valid far beyond the range used here.
    year -= month <= 2;
    const long long era = (year >= 0 ? year : year - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(year - era * 400);
    const unsigned doy =
        static_cast<unsigned>((153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

long long parse_date(const std::string& iso) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 ||
        d > 31) {
        throw std::invalid_argument("bad date '" + iso + "', expected YYYY-MM-DD");
    }
    return days_from_civil(y, m, d);
}

std::string format_date(long long days) {
    long long z = days + 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long long y = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", y + (m <= 2), m, d);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    return h;
}

// Jittered event times for `count` events inside day `day`; strictly ordered.
void append_day_events(std::vector<double>& times, int day, long long count, Rng& rng) {
    if (count <= 0) return;
    std::vector<double> draws(static_cast<std::size_t>(count));
    while (true) {
        for (double& d : draws) d = static_cast<double>(day) + rng.uniform01();
        std::sort(draws.begin(), draws.end());
        if (std::adjacent_find(draws.begin(), draws.end()) == draws.end()) break;
    }
    times.insert(times.end(), draws.begin(), draws.end());
}

}  // namespace

CountyDataset read_county_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 6 || header[0] != "fips" || header[1] != "lat" || header[2] != "lon" ||
        header[3] != "population" || header[4] != "lockdown_date") {
        throw std::runtime_error(path.string() +
                                 ": expected header fips,lat,lon,population,lockdown_date,<dates>");
    }

    CountyDataset dataset;
    dataset.anchor_day = parse_date(header[5]);
    for (std::size_t c = 6; c < header.size(); ++c) {
        const long long day = parse_date(header[c]);
        if (day != dataset.anchor_day + static_cast<long long>(c - 5)) {
            throw std::runtime_error(path.string() + ": date columns must be consecutive days");
        }
    }
    const std::size_t n_days = header.size() - 5;

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) +
                                     " has the wrong column count");
        }
        CountyRecord rec;
        rec.fips = fields[0];
        rec.lat = std::stod(fields[1]);
        rec.lon = std::stod(fields[2]);
        rec.population = std::stod(fields[3]);
        if (!(rec.population > 0.0)) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) +
                                     " has non-positive population");
        }
        if (!fields[4].empty()) {
            rec.lockdown_day = static_cast<int>(parse_date(fields[4]) - dataset.anchor_day);
        }
        rec.cumulative.reserve(n_days);
        long long prev = 0;
        for (std::size_t c = 5; c < fields.size(); ++c) {
            const long long v = std::stoll(fields[c]);
            if (v < prev) {
                throw std::runtime_error(path.string() + ": row " + std::to_string(row) +
                                         " has a decreasing cumulative series");
            }
            rec.cumulative.push_back(v);
            prev = v;
        }
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

void write_county_csv(const std::filesystem::path& path, const CountyDataset& dataset) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::size_t n_days = 0;
    for (const CountyRecord& rec : dataset.records) n_days = std::max(n_days, rec.cumulative.size());
    out << "fips,lat,lon,population,lockdown_date";
    for (std::size_t d = 0; d < n_days; ++d) {
        out << ',' << format_date(dataset.anchor_day + static_cast<long long>(d));
    }
    out << '\n';
    for (const CountyRecord& rec : dataset.records) {
        out << rec.fips << ',' << rec.lat << ',' << rec.lon << ',' << rec.population << ',';
        if (rec.lockdown_day) {
            out << format_date(dataset.anchor_day + *rec.lockdown_day);
        }
        long long last = 0;
        for (std::size_t d = 0; d < n_days; ++d) {
            if (d < rec.cumulative.size()) last = rec.cumulative[d];
            out << ',' << last;
        }
        out << '\n';
    }
}

EventSequence counts_to_events(const CountyRecord& rec, Aggregation aggregation,
                               std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xc0147, fnv1a(rec.fips)));
    std::vector<double> times;
    long long prev = 0;
    for (std::size_t d = 0; d < rec.cumulative.size(); ++d) {
        const long long cum = rec.cumulative[d];
        if (cum < prev) throw std::invalid_argument("counts_to_events: decreasing series");
        long long inc = 0;
        if (aggregation == Aggregation::per_case) {
            inc = cum - prev;
        } else {
            inc = cum / 100 - prev / 100;
        }
        append_day_events(times, static_cast<int>(d), inc, rng);
        prev = cum;
    }

    EventSequence seq;
    seq.horizon = static_cast<double>(rec.cumulative.size());
    if (seq.horizon <= 0.0) seq.horizon = 1.0;
    const Eigen::Vector2d centroid{rec.lat, rec.lon};
    seq.events.reserve(times.size());
    for (const double t : times) seq.events.push_back({t, centroid});
    return seq;
}

StaticFeatures build_features(const CountyRecord& rec, const ScalingTransform& scaling) {
    if (!(rec.population > 0.0)) {
        throw std::invalid_argument("build_features: population must be positive");
    }
    StaticFeatures f(kCountyFeatureCount);
    f[0] = std::log10(rec.population);
    f[1] = rec.lockdown_day ? scaling.scale_time(static_cast<double>(*rec.lockdown_day)) : -1.0;
    const Eigen::Vector2d scaled = scaling.scale_location({rec.lat, rec.lon});
    f[2] = scaled.x();
    f[3] = scaled.y();
    return f;
}

std::size_t GroupSpec::bucket_of(long long length) const {
    for (std::size_t i = 0; i < upper_bounds.size(); ++i) {
        if (length <= upper_bounds[i]) return i;
    }
    return upper_bounds.size();
}

std::string GroupSpec::bucket_name(std::size_t bucket) const {
    if (bucket == 0) return "len_le_" + std::to_string(upper_bounds.front());
    if (bucket >= upper_bounds.size()) return "len_gt_" + std::to_string(upper_bounds.back());
    return "len_" + std::to_string(upper_bounds[bucket - 1]) + "_" +
           std::to_string(upper_bounds[bucket]);
}

std::vector<std::vector<std::size_t>> group_counties(const std::vector<CountyRecord>& records,
                                                     const GroupSpec& spec) {
    if (spec.upper_bounds.empty() ||
        !std::is_sorted(spec.upper_bounds.begin(), spec.upper_bounds.end())) {
        throw std::invalid_argument("group spec bounds must be nonempty and increasing");
    }
    std::vector<std::vector<std::size_t>> groups(spec.bucket_count());
    for (std::size_t i = 0; i < records.size(); ++i) {
        groups[spec.bucket_of(records[i].total_cases())].push_back(i);
    }
    return groups;
}

ScenarioReport run_scenario(const GeneratorParams& params, const ScalingTransform& scaling,
                            const std::vector<std::string>& feature_schema, int event_unit,
                            const CountyRecord& rec, const ScenarioSpec& scenario,
                            std::uint64_t seed) {
    if (scenario.rollouts < 1) throw std::invalid_argument("run_scenario: rollouts must be >= 1");
    const auto lockdown_slot =
        std::find(feature_schema.begin(), feature_schema.end(), "lockdown_time");
    if (lockdown_slot == feature_schema.end()) {
        throw std::invalid_argument(
            "run_scenario: checkpoint was trained without a lockdown feature");
    }
    if (static_cast<int>(feature_schema.size()) != params.dims.features) {
        throw std::invalid_argument("run_scenario: feature schema does not match generator dims");
    }
    if (!rec.lockdown_day) {
        throw std::invalid_argument("run_scenario: county has no recorded lockdown day");
    }
    if (event_unit < 1) throw std::invalid_argument("run_scenario: event_unit must be >= 1");

    CountyRecord shifted = rec;
    shifted.lockdown_day = *rec.lockdown_day + scenario.shift_days;
    const StaticFeatures features = build_features(shifted, scaling);

    const Aggregation aggregation =
        event_unit >= 100 ? Aggregation::per_hundred : Aggregation::per_case;
    EventSequence history;
    history.horizon = 1.0;
    if (scenario.condition_until_day) {
        const double cutoff = scaling.scale_time(static_cast<double>(*scenario.condition_until_day));
        EventSequence observed = counts_to_events(rec, aggregation, seed);
        EventSequence scaled = scaling.scale(observed);
        for (const Event& e : scaled.events) {
            if (e.time < cutoff) history.events.push_back(e);
        }
        history.horizon = std::max(1.0, cutoff);
    }

    const double horizon = scaling.scale_time(static_cast<double>(scenario.end_day + 1));
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("run_scenario: end day precedes the time origin");
    }

    ScenarioReport report;
    report.county = rec.fips;
    report.shift_days = scenario.shift_days;
    report.rollouts = scenario.rollouts;
    for (int d = 0; d <= scenario.end_day; ++d) report.days.push_back(d);

    std::vector<double> finals(static_cast<std::size_t>(scenario.rollouts));
    for (int r = 0; r < scenario.rollouts; ++r) {
        const EventSequence generated =
            scenario.condition_until_day
                ? rollout_from(params, history, features, horizon,
                               derive_seed(seed, 0x5ce0, static_cast<std::uint64_t>(r)))
                : rollout(params, features, horizon,
                          derive_seed(seed, 0x5ce0, static_cast<std::uint64_t>(r)))
                      .sequence;

        std::vector<double> cumulative(static_cast<std::size_t>(scenario.end_day) + 1, 0.0);
        auto add_events = [&](const EventSequence& seq) {
            for (const Event& e : seq.events) {
                const double raw_day = scaling.unscale_time(e.time);
                int day = static_cast<int>(std::floor(raw_day));
                day = std::clamp(day, 0, scenario.end_day);
                cumulative[static_cast<std::size_t>(day)] += static_cast<double>(event_unit);
            }
        };
        if (scenario.condition_until_day) add_events(history);
        add_events(generated);
        double running = 0.0;
        for (double& v : cumulative) {
            running += v;
            v = running;
        }
        finals[static_cast<std::size_t>(r)] = cumulative.back();
        report.trajectories.push_back(std::move(cumulative));
    }

    double mean = 0.0;
    for (const double v : finals) mean += v;
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (const double v : finals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(finals.size());
    report.final_mean = mean;
    report.final_std = std::sqrt(var);
    return report;
}

std::string scenario_report_to_json(const ScenarioReport& report, const std::string& end_date) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["county"] = report.county;
    j["shift_days"] = report.shift_days;
    j["R"] = report.rollouts;
    j["end_date"] = end_date;
    j["final_mean"] = report.final_mean;
    j["final_std"] = report.final_std;
    j["days"] = report.days;
    j["trajectories"] = report.trajectories;
    return j.dump(2);
}

}  // namespace stpp
