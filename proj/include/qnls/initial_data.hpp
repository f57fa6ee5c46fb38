#pragma once

#include "qnls/spectral.hpp"

#include <json.hpp>

#include <string>

namespace qnls {

// Built-in initial data. `amplitude` is the value of the chosen norm after scaling:
// "peak" (max |u|), "l2" or "h1".
struct DataSpec {
    std::string kind = "gaussian-bump"; // gaussian-bump, shell-random, plane-wave, two-shell, packet, band-limited
    double amplitude = 0.1;
    std::string norm = "peak";
    double width = 1.0;       // bump width σ, or packet frequency width
    Vec3 centre{0, 0, 0};     // bump centre
    Vec3 carrier{0, 0, 0};    // carrier wavevector (packet centre frequency)
    std::array<int, 3> mode{1, 0, 0}; // plane-wave lattice mode
    int shell = 3;
    int shell2 = 5;
    int modes = 4; // band-limited: |m_j| <= modes

    static DataSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

Field make_initial_data(const BoxGrid& g, const DataSpec& spec, unsigned seed);

} // namespace qnls
