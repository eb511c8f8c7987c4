#pragma once

#include "nllab/loop.hpp"

#include <string>
#include <utility>
#include <vector>

namespace nllab {

// Flat `key = value` config files: one key per line, '#' comments, every
// key optional with documented defaults, unknown keys rejected. Overrides
// are (key, value) pairs that win over file values.
RunConfig parse_config(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Same, but from config text instead of a file.
RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Every key in a fixed order, shortest round-trip number formatting; the
// exact bytes written to config.resolved.
std::string serialize_config(const RunConfig& cfg);

// The known key set, in serialization order.
const std::vector<std::string>& config_keys();

// Shortest round-trip decimal for a double ("0.1", "nan", ...).
std::string format_double(double v);

} // namespace nllab
