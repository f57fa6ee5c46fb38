#include "qnls/config.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace qnls {

namespace {

nlohmann::json to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : *t) out[std::string(k.str())] = to_json(v);
        return out;
    }
    if (auto a = n.as_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& v : *a) out.push_back(to_json(v));
        return out;
    }
    if (auto v = n.as_integer()) return v->get();
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_boolean()) return v->get();
    if (auto v = n.as_string()) return v->get();
    throw ConfigError("config: unsupported TOML value type");
}

nlohmann::json parse_scalar(const std::string& s) {
    try {
        auto j = nlohmann::json::parse(s);
        if (!j.is_object()) return j;
    } catch (const nlohmann::json::parse_error&) {
    }
    return s;
}

std::string where(const std::string& key) { return "config: key '" + key + "'"; }

} // namespace

nlohmann::json parse_toml(const std::string& text, const std::string& origin) {
    try {
        return to_json(toml::parse(text, origin));
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: " << origin << ":" << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
}

nlohmann::json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        try {
            return nlohmann::json::parse(ss.str());
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config: " + path + ": " + e.what());
        }
    }
    return parse_toml(ss.str(), path);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const nlohmann::json& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.dump())));
    return buf;
}

void apply_override(nlohmann::json& cfg, const std::string& dotted_key, const std::string& value) {
    nlohmann::json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
        std::size_t dot = dotted_key.find('.', start);
        std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("config: malformed override key '" + dotted_key + "'");
        if (dot == std::string::npos) {
            (*node)[part] = parse_scalar(value);
            return;
        }
        if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
        node = &(*node)[part];
        if (!node->is_object()) throw ConfigError("config: override path '" + dotted_key + "' crosses a value");
        start = dot + 1;
    }
}

double get_number(const nlohmann::json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(where(key) + " must be a number");
    return j.at(key).get<double>();
}

double require_number(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(where(key) + " is required");
    return get_number(j, key, 0.0);
}

int get_int(const nlohmann::json& j, const std::string& key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    return j.at(key).get<int>();
}

std::string get_string(const nlohmann::json& j, const std::string& key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(where(key) + " must be a string");
    return j.at(key).get<std::string>();
}

std::vector<double> get_numbers(const nlohmann::json& j, const std::string& key,
                                const std::vector<double>& fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array()) throw ConfigError(where(key) + " must be a list of numbers");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw ConfigError(where(key) + " must be a list of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

const nlohmann::json& get_table(const nlohmann::json& j, const std::string& key) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw ConfigError(where(key) + " must be a table");
    return j.at(key);
}

} // namespace qnls
