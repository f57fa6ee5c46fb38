#include "qnls/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace qnls {

namespace fs = std::filesystem;

void Trajectory::append(double t, Field f) {
    require_same_grid(grid, f.grid);
    if (!times.empty() && !(dt >= 0.0 ? t > times.back() : t < times.back()))
        throw std::invalid_argument("Trajectory: times must be monotone");
    times.push_back(t);
    snapshots.push_back(std::move(f));
}

double Trajectory::sample_spacing() const {
    if (times.size() < 2) return 0.0;
    return (times.back() - times.front()) / static_cast<double>(times.size() - 1);
}

bool Trajectory::uniform(double rel_tol) const {
    if (times.size() < 3) return true;
    double h = sample_spacing();
    for (std::size_t i = 1; i < times.size(); ++i)
        if (std::abs((times[i] - times[i - 1]) - h) > rel_tol * std::abs(h)) return false;
    return true;
}

Field Trajectory::at(double t) const {
    if (snapshots.empty()) throw std::runtime_error("Trajectory: empty");
    const std::size_t m = times.size();
    const bool increasing = m < 2 || times.back() > times.front();
    // Position of t within the ordered samples.
    std::size_t pos;
    if (increasing)
        pos = std::upper_bound(times.begin(), times.end(), t) - times.begin();
    else
        pos = std::upper_bound(times.begin(), times.end(), t, std::greater<double>()) - times.begin();
    for (std::size_t i = (pos > 0 ? pos - 1 : 0); i < std::min(m, pos + 1); ++i) {
        double scale = std::max(1.0, std::abs(times[i]));
        if (std::abs(times[i] - t) <= 1e-13 * scale) return snapshots[i];
    }
    if (m < 4) throw std::runtime_error("Trajectory: interpolation needs four snapshots");
    std::size_t lo = pos >= 2 ? pos - 2 : 0;
    lo = std::min(lo, m - 4);
    Field out(grid);
    for (std::size_t a = lo; a < lo + 4; ++a) {
        double w = 1.0;
        for (std::size_t b = lo; b < lo + 4; ++b)
            if (b != a) w *= (t - times[b]) / (times[a] - times[b]);
        const auto& s = snapshots[a].values;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * s[i];
    }
    return out;
}

std::vector<std::string> Trajectory::save(const std::string& dir) const {
    fs::create_directories(dir);
    std::vector<std::string> files;
    nlohmann::json man = meta;
    man["grid"] = {{"dim", grid.dim()}, {"points_per_axis", grid.n()}, {"box_length", grid.length()}};
    man["dt"] = dt;
    man["stride"] = stride;
    man["scheme"] = scheme;
    man["times"] = times;
    man["alias_flags"] = alias_flags;
    man["max_alias_fraction"] = max_alias_fraction;
    nlohmann::json snaps = nlohmann::json::array();
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "snap_%05zu.qnls", i);
        write_snapshot((fs::path(dir) / name).string(), snapshots[i], times[i]);
        snaps.push_back(name);
        files.push_back(name);
    }
    man["snapshots"] = snaps;
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << man.dump(2) << "\n";
    files.push_back("manifest.json");
    return files;
}

Trajectory Trajectory::load(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw std::runtime_error("Trajectory: missing manifest in " + dir);
    nlohmann::json man = nlohmann::json::parse(is);
    const auto& g = man.at("grid");
    BoxGrid grid(g.at("dim").get<int>(), g.at("points_per_axis").get<int>(),
                 g.at("box_length").get<double>());
    Trajectory tr(grid);
    tr.dt = man.value("dt", 0.0);
    tr.stride = man.value("stride", 1);
    tr.scheme = man.value("scheme", std::string());
    tr.alias_flags = man.value("alias_flags", std::size_t(0));
    tr.max_alias_fraction = man.value("max_alias_fraction", 0.0);
    for (const auto& name : man.at("snapshots")) {
        Snapshot s = read_snapshot((fs::path(dir) / name.get<std::string>()).string());
        require_same_grid(grid, s.field.grid);
        tr.append(s.time, std::move(s.field));
    }
    for (const char* k : {"grid", "dt", "stride", "scheme", "times", "snapshots",
                          "alias_flags", "max_alias_fraction"})
        man.erase(k);
    tr.meta = man;
    return tr;
}

} // namespace qnls
