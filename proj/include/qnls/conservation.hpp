#pragma once

#include "qnls/evolution.hpp"
#include "qnls/model.hpp"
#include "qnls/multilinear.hpp"
#include "qnls/spectral.hpp"
#include "qnls/trajectory.hpp"

#include <string>
#include <vector>

namespace qnls {

// M = |u|², P_j = i(ū∂_j u − u∂_j ū), E_jm = 2Re(∂_j u ∂_m ū − ū ∂_j∂_m u).
struct DensitySet {
    Field M;
    std::vector<Field> P;
    std::vector<Field> E; // E[j*n+m]
    double imag_residue = 0.0;

    explicit DensitySet(const BoxGrid& g) : M(g) {}
    const Field& e(int j, int m) const { return E[j * M.grid.dim() + m]; }
};

DensitySet densities(const Field& u);

struct LedgerRow {
    double time;
    std::string id;
    double l1, l2, linf;
    double flux_norm; // L² size of the flux divergence, for scale
};

using Ledger = std::vector<LedgerRow>;

// 4th-order central difference at interior index m of a uniformly sampled sequence.
double central_difference_weight(int offset);

Ledger flat_flux_residual(const Trajectory& traj);
double max_l2(const Ledger& ledger, const std::string& id_prefix);
void write_ledger_csv(const std::string& path, const Ledger& ledger);

// Covariant quantities for the paradifferential flow at one time.
struct CovariantDensities {
    Field M;
    std::vector<Field> P_low;  // P_m
    std::vector<Field> P;      // P^j = G^{jm} P_m
    std::vector<Field> E;      // E^{kj}, index k*n+j
    Field mass_source;         // 2 Im(f v̄)
    std::vector<Field> momentum_source; // G^j + 2Re(v̄∂^j f − f∂^j v̄)

    explicit CovariantDensities(const BoxGrid& g) : M(g), mass_source(g) {}
};

// dGdt may be empty when only the mass-side quantities are needed.
CovariantDensities covariant_densities(const Field& v, const MetricField& G, const MetricField* dGdt,
                                       const Field* f);

// Background metric g_[<λ] at time t for the paradifferential flow on shell k.
struct ParaContext {
    const ModelSpec* model;
    const Trajectory* background;
    int k;
    Forcing f;

    MetricField metric(double t) const;
    MetricField metric_rate(double t, double h) const; // 4th-order central difference
};

Ledger para_flux_residual(const Trajectory& v, const ParaContext& ctx);

// Hermitian rank-separable bilinear symbol a(ξ,η) = Σ_r α_r(ξ) β_r(η).
struct BilinearSymbol {
    std::vector<std::pair<SlotFactor, SlotFactor>> terms;
    cplx operator()(const Vec3& xi, const Vec3& eta) const;
    static BilinearSymbol unit();
    static BilinearSymbol shell(const BoxGrid& g, int k);
};

// Checks a(η,ξ) = conj(a(ξ,η)) on lattice samples; throws std::invalid_argument otherwise.
void require_hermitian(const BilinearSymbol& a, const BoxGrid& g, double tol = 1e-12);

DensitySet weighted_densities(const Field& u, const BilinearSymbol& a);
Ledger weighted_flux_residual(const Trajectory& traj, const BilinearSymbol& a);

} // namespace qnls
