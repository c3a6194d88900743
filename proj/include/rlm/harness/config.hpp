#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace rlm::harness {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Key-value text with [section] and [[array-of-tables]] headers; values are
// strings, numbers, booleans, and flat arrays.
nlohmann::json parse_keyvalue(const std::string& text);

// Reads a config file; a document starting with '{' or '[' is parsed as JSON,
// anything else as key-value text.
nlohmann::json load_config(const std::string& path);

}  // namespace rlm::harness
