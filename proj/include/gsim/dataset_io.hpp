#pragma once

#include "gsim/state.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace gsim {

// Line-delimited JSON dataset format.
//
// Line 1 is a metadata record:
//   {"format":"gsim-dataset","version":1,"env":..,"horizon":..,"count":..,"projection":[..]}
// Every following line is one trajectory:
//   {"schema":<env>,"split":"train|val|test|none","init":{..},"steps":[{"action":..,"next":{..}}, ..]}
//
// State objects keep field order. Ints are JSON integers, floats are JSON floats,
// pipelines are {"pipeline":[[q,t],..]}, record lists are {"schema":[[attr,kind],..],"rows":[[..],..]}.

void write_dataset(std::ostream& out, const Dataset& dataset);
/// Throws ParseError carrying the 1-based line number of the offending record.
[[nodiscard]] Dataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path);

/// Single-state JSON (same encoding as inside dataset lines).
[[nodiscard]] std::string state_to_json(const SystemState& state);
[[nodiscard]] SystemState state_from_json(const std::string& text);

} // namespace gsim
