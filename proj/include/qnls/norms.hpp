#pragma once

#include "qnls/spectral.hpp"
#include "qnls/stats.hpp"
#include "qnls/trajectory.hpp"

#include <json.hpp>

#include <limits>
#include <string>
#include <vector>

namespace qnls {

inline constexpr double infinite_exponent = std::numeric_limits<double>::infinity();

// Sharp relation 2/p + n/q = n/2 with p, q ≥ 2, excluding (2, ∞) in n = 2.
bool strichartz_admissible(int n, double p, double q);

struct StrichartzValue {
    double value;
    double value_double_stride; // NaN when fewer than three snapshots remain
};

// Trapezoid in time of ‖u(t)‖_{L^q}^p; p or q infinite become max norms.
StrichartzValue strichartz_norm(const Trajectory& traj, double p, double q, bool allow_nonsharp = false);

// ‖|D|^s (P_ku u · conj(τ_{x0} P_kv v))‖_{L²_{t,x}} with s ∈ {0, (3−n)/2}. Both
// projections are dealiased before the product.
double bilinear_l2(const Trajectory& u, int ku, const Trajectory& v, int kv, const Vec3& x0,
                   double exponent = 0.0);

// Fourier Gaussian packet of width s centred at frequency c, unit L² norm, centred at x = 0.
Field frequency_packet(const BoxGrid& g, const Vec3& centre, double width, cplx phase = 1.0);

struct TransversalitySample {
    double lambda1, lambda2, value;
    int points; // per axis
};

struct TransversalityFit {
    int dim = 2;
    LinearFit lambda1_fit, lambda2_fit;
    std::vector<TransversalitySample> lambda1_samples, lambda2_samples;
    nlohmann::json to_json() const;
};

struct TransversalityConfig {
    int dim = 2;
    double lambda1_fixed = 4.0;
    std::vector<double> lambda2_values{8, 16, 32, 64};
    double lambda2_fixed = 64.0;
    std::vector<double> lambda1_values{2, 4, 8};
    int time_samples = 81;
    unsigned seed = 1;
    int max_points = 512; // per-axis grid cap
};

// Two packets of frequency width λ₁/2 centred at ∓λ₂ e₁, evolved by the flat flow over a
// window that contains their crossing; returns ‖u¹u²‖_{L²_{t,x}}.
TransversalitySample transversal_pair_norm(int dim, double lambda1, double lambda2, int time_samples,
                                           unsigned seed, int max_points = 512);
TransversalityFit transversality_scaling_fit(const TransversalityConfig& cfg);

// d² = max_μ ‖v_μ(0)‖² + max_{μ,ν,x0} ‖v_μ f_ν^{x0}‖_{L¹_{t,x}} over the given families and a
// lattice of `lattice`^n shifts.
double d_lambda_family(const std::vector<Trajectory>& v, const std::vector<Trajectory>& f, int lattice = 8);
// Families P_μ v, P_ν f for μ, ν ∈ {k−1, k, k+1} clipped to the valid shells.
double d_lambda(const Trajectory& v, const Trajectory& f, int k, int lattice = 8);

struct ScatteringProbe {
    Field candidate;
    std::vector<double> probe_times;
    std::vector<double> increments;
    std::vector<double> ratios; // increments[i] / increments[i+1]
    bool monotone = false;

    explicit ScatteringProbe(const BoxGrid& g) : candidate(g) {}
};

ScatteringProbe scattering_extract(const Trajectory& traj, const std::vector<double>& probes, double s = 1.0);

struct NormRow {
    std::string id;
    int k1 = 0, k2 = 0;
    Vec3 x0{0, 0, 0};
    double value = 0.0;
    double t0 = 0.0, t1 = 0.0;
};

struct NormLedger {
    int dim = 0, points = 0;
    double length = 0.0;
    std::vector<NormRow> rows;

    void add(const Trajectory& traj, NormRow row);
    void write_csv(const std::string& path) const;
    nlohmann::json to_json() const;
};

} // namespace qnls
