#include "stpp/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "stpp/version.hpp"

namespace stpp {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    p.replace_extension(".json");
    return p;
}

}  // namespace

EventSequence read_event_csv(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file " + csv_path.string());
    // Tolerate an optional UTF-8 BOM in the header line.
    if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,x,y") {
        throw std::runtime_error(csv_path.string() + ": expected header 't,x,y', got '" + line + "'");
    }

    EventSequence seq;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Event e;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf%c", &e.time, &e.location.x(),
                        &e.location.y(), &extra) < 3) {
            throw std::runtime_error(csv_path.string() + ": malformed row " + std::to_string(row));
        }
        seq.events.push_back(e);
    }

    const std::filesystem::path side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        std::ifstream js(side);
        nlohmann::json j = nlohmann::json::parse(js);
        if (j.contains("horizon")) seq.horizon = j["horizon"].get<double>();
        if (j.contains("features") && !j["features"].is_null()) {
            const auto vals = j["features"].get<std::vector<double>>();
            StaticFeatures f(static_cast<Eigen::Index>(vals.size()));
            for (std::size_t i = 0; i < vals.size(); ++i) f[static_cast<Eigen::Index>(i)] = vals[i];
            seq.features = f;
        }
    } else {
        double t_last = seq.events.empty() ? 0.0 : seq.events.back().time;
        seq.horizon = std::max(1.0, t_last * (1.0 + 1e-9) + 1e-9);
    }
    return seq;
}

void write_event_csv(const std::filesystem::path& csv_path, const EventSequence& seq,
                     bool with_sidecar) {
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << "t,x,y\n";
    for (const Event& e : seq.events) {
        out << format_double(e.time) << ',' << format_double(e.location.x()) << ','
            << format_double(e.location.y()) << '\n';
    }
    if (with_sidecar) {
        nlohmann::json j;
        j["version"] = kVersion;
        j["horizon"] = seq.horizon;
        if (seq.features) {
            std::vector<double> vals(seq.features->data(),
                                     seq.features->data() + seq.features->size());
            j["features"] = vals;
        }
        std::ofstream js(sidecar_path(csv_path));
        js << j.dump(2) << '\n';
    }
}

std::vector<EventSequence> load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<EventSequence> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(read_event_csv(f));
    if (out.empty()) throw std::runtime_error("no event CSV files in " + dir.string());
    return out;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<EventSequence>& sequences,
                  const std::string& prefix) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s%04zu.csv", prefix.c_str(), i);
        write_event_csv(dir / name, sequences[i]);
    }
}

}  // namespace stpp
