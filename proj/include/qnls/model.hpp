#pragma once

#include "qnls/multilinear.hpp"
#include "qnls/spectral.hpp"

#include <json.hpp>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace qnls {

using Mat3 = std::array<double, 9>; // row-major, leading n×n block used

// Pointwise metric g(u). Built-in kinds:
//   identity                          g = I
//   identity-plus-|u|^2               g = (1 + κ|u|²) I
//   identity-plus-|u|^2-anisotropic   g = I + κ|u|² A, A symmetric
//   identity-plus-re-u                g = (1 + κ Re u) I   (not cubic; validator fixture)
//   plugin                            user callable
class Metric {
public:
    using Eval = std::function<Mat3(cplx u)>;
    using Deriv = std::function<Mat3(cplx u, cplx w)>;

    Metric();
    static Metric identity();
    static Metric iso_abs2(double kappa);
    static Metric aniso_abs2(double kappa, const Mat3& A);
    static Metric linear_re(double kappa);
    // Derivative defaults to a central difference along w when omitted.
    static Metric plugin(Eval eval, Deriv deriv = {});

    const std::string& kind() const { return kind_; }
    double kappa() const { return kappa_; }
    const Mat3& aniso() const { return A_; }
    bool is_identity() const { return kind_ == "identity"; }

    Mat3 eval(cplx u) const;
    // d/dε g(u + εw) at ε = 0.
    Mat3 deriv(cplx u, cplx w) const;

private:
    std::string kind_;
    double kappa_ = 0.0;
    Mat3 A_{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Eval plug_eval_;
    Deriv plug_deriv_;
};

// One factor of a monomial: u, ū, ∂_j u or ∂_j ū.
struct Factor {
    bool conj = false;
    int axis = -1; // -1 means no derivative
};

struct Monomial {
    cplx coeff = 1.0;
    std::vector<Factor> factors;
    int degree() const { return static_cast<int>(factors.size()); }
    int derivative_count() const;
    int charge() const; // plain minus conjugated factors
};

struct Nonlinearity {
    std::vector<Monomial> terms;

    bool empty() const { return terms.empty(); }
    cplx eval(cplx u, const cplx* du) const;
    // d/dε N(u + εw, ∇u + ε∇w) at ε = 0.
    cplx deriv(cplx u, const cplx* du, cplx w, const cplx* dw) const;
    bool needs_gradient() const;
};

// Parses tokens "u", "ubar", "d0u", "d1ubar", ...
Factor parse_factor(const std::string& token);
std::string factor_token(const Factor& f);

struct ModelSpec {
    int dim = 2;
    Metric metric;
    Nonlinearity N;
    bool declared_cubic = true;
    bool declared_conservative = false;
    double pd_radius = 0.5;

    bool has_phase_rotation() const;
    // Symbol of the (u, ū, u)-type cubic monomials, symmetrized in the plain slots.
    Symbol cubic_symbol() const;
    // Checks g(0) = I exactly, symmetry and positivity for |u| ≤ pd_radius, and
    // at most quadratic dependence on ∂u. Throws std::invalid_argument on failure.
    void validate() const;

    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& j);
    // Semilinear conservative test model: g = I, N = |u|²u.
    static ModelSpec semilinear_cubic(int dim, double coeff = 1.0);
    static ModelSpec quasilinear_iso(int dim, double kappa, double cubic_coeff = 1.0);
};

struct CubicValidation {
    double metric_slope = 0.0;
    double nonlinearity_slope = 0.0;
    bool metric_vacuous = false;
    bool nonlinearity_vacuous = false;
    bool pass = false;
    std::vector<double> eps, metric_norms, nonlinearity_norms;
};

CubicValidation validate_cubic(const ModelSpec& m, unsigned seed = 1);

// g_[<λ] = P_{≤k−1} g(P_{≤k−3} u), λ = 2^k. comp[j*n+l] holds component (j,l).
struct MetricField {
    int n = 0;
    std::vector<Field> comp;
    const Field& operator()(int j, int l) const { return comp[j * n + l]; }
};

MetricField truncated_metric(const ModelSpec& m, const Field& u, int k);
// g(u) sampled pointwise on the grid, without truncation.
MetricField metric_field(const ModelSpec& m, const Field& u);
MetricField identity_metric(const BoxGrid& g);

struct Bicharacteristic {
    std::vector<double> times;
    std::vector<Vec3> x, xi;
    std::vector<double> H;
    double max_xi_deviation = 0.0;
    double max_xdot_deviation = 0.0;
    double max_H_drift = 0.0; // relative to H(0)
    int max_halvings = 0;
};

// RK4 on ẋ = ∂_ξH, ξ̇ = −∂_xH with H = g^{jk}ξ_jξ_k and g sampled by spectral
// interpolation. Steps are halved while the relative drift of H exceeds h_tol.
Bicharacteristic bicharacteristic_trace(const MetricField& g, const Vec3& x0, const Vec3& xi0,
                                        double T, double dt, double h_tol = 1e-6,
                                        int max_halvings = 20);

} // namespace qnls
