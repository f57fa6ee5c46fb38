#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qnls {

// Schema violations and unreadable config or model files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json parse_toml(const std::string& text, const std::string& origin = "<string>");
// .json files are parsed as JSON, everything else as TOML.
nlohmann::json load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
// FNV-1a of the canonical (key-sorted, compact) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& cfg);

// Sets a dotted key ("solver.dt") from its textual value; numbers, booleans and
// bracketed lists are recognized, anything else is stored as a string.
void apply_override(nlohmann::json& cfg, const std::string& dotted_key, const std::string& value);

// Typed access with a schema error naming the offending key.
double get_number(const nlohmann::json& j, const std::string& key, double fallback);
double require_number(const nlohmann::json& j, const std::string& key);
int get_int(const nlohmann::json& j, const std::string& key, int fallback);
std::string get_string(const nlohmann::json& j, const std::string& key, const std::string& fallback);
std::vector<double> get_numbers(const nlohmann::json& j, const std::string& key,
                                const std::vector<double>& fallback);
const nlohmann::json& get_table(const nlohmann::json& j, const std::string& key);

} // namespace qnls
