#pragma once

#include "qnls/spectral.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace qnls {

// Time-indexed snapshots of one flow on one grid.
struct Trajectory {
    BoxGrid grid;
    std::vector<double> times;
    std::vector<Field> snapshots;
    double dt = 0.0;
    int stride = 1;
    std::string scheme;
    std::size_t alias_flags = 0;
    double max_alias_fraction = 0.0;
    nlohmann::json meta = nlohmann::json::object();

    explicit Trajectory(const BoxGrid& g) : grid(g) {}

    std::size_t size() const { return snapshots.size(); }
    void append(double t, Field f);
    // Spacing between stored snapshots.
    double sample_spacing() const;
    bool uniform(double rel_tol = 1e-9) const;
    // Four-point Lagrange interpolation in time; exact at stored times.
    Field at(double t) const;

    // manifest.json plus snap_XXXXX.qnls; returns written file names.
    std::vector<std::string> save(const std::string& dir) const;
    static Trajectory load(const std::string& dir);
};

} // namespace qnls
