#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stpp/events.hpp"

namespace stpp {

// Event CSV format: header "t,x,y", one event per row, one file per sequence.
// An optional sidecar JSON next to the CSV (same stem, .json extension) holds
// {"horizon": <real>, "features": [<real>...]}. Without a sidecar the horizon
// defaults to just above the last event time.
EventSequence read_event_csv(const std::filesystem::path& csv_path);
void write_event_csv(const std::filesystem::path& csv_path, const EventSequence& seq,
                     bool with_sidecar = true);

// Loads every *.csv in the directory, sorted by filename for determinism.
std::vector<EventSequence> load_dataset(const std::filesystem::path& dir);

// Writes sequences as <prefix>NNNN.csv (+ sidecars) into dir, creating it.
void save_dataset(const std::filesystem::path& dir, const std::vector<EventSequence>& sequences,
                  const std::string& prefix = "seq_");

}  // namespace stpp
