#pragma once

#include "qnls/conservation.hpp"
#include "qnls/model.hpp"
#include "qnls/spectral.hpp"
#include "qnls/trajectory.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qnls {

enum class WeightKind { abs, quadratic, custom };

// Convex radial weight a(|z|) with gradient a'(r) ẑ and Hessian a'' ẑ⊗ẑ + (a'/r)(I − ẑ⊗ẑ).
struct WeightSpec {
    WeightKind kind = WeightKind::abs;
    bool minimal_image = true;
    std::function<double(double)> d1; // a'(r), custom only
    std::function<double(double)> d2; // a''(r), custom only

    static WeightSpec absolute();
    // Polynomial weight; the torus wrap would break smoothness, so it is off by default.
    static WeightSpec quadratic(bool minimal_image = false);
    static WeightSpec custom(std::function<double(double)> d1, std::function<double(double)> d2,
                             bool minimal_image = true);

    // z = 0 is excluded from pair sums when the Hessian is singular there.
    bool singular_at_origin() const { return kind == WeightKind::abs; }
    Vec3 gradient(const Vec3& z, int n) const;
    Mat3 hessian(const Vec3& z, int n) const;
    Vec3 displacement(const Vec3& x, const Vec3& y, int n, double L) const;
};

struct MorawetzOptions {
    int cap = 0;               // grid cap per axis; 0 picks 1024 / 32 / 16 by dimension
    bool strict_support = true; // a failed half-box check throws instead of warning
    double support_fraction = 0.999;
};

// Reported by the half-box support check when strict_support is off.
struct SupportWarning {
    std::string message;
};
std::vector<SupportWarning> take_support_warnings();

double interaction_functional(const Field& u, const Field& v, const Vec3& x0, const WeightSpec& w,
                              const MorawetzOptions& opt = {});
// ∬ a_jm [M(u)E_jm(v) + E_jm(u)M(v) − P_m(u)P_j(v) − P_j(u)P_m(v)].
double j4(const Field& u, const Field& v, const Vec3& x0, const WeightSpec& w,
          const MorawetzOptions& opt = {});
// 4∬ a_jk F_j F̄_k with F_j(x,y) = u(x)∂_j v̄(y) + ∂_j u(x) v̄(y).
double j4_main(const Field& u, const Field& v, const Vec3& x0, const WeightSpec& w,
               const MorawetzOptions& opt = {});
// For a = |x|²: 8[‖∇u‖²‖v‖² + ‖u‖²‖∇v‖² − 2 p_u·p_v], p = Im∫ū∇u.
double j4_quadratic_closed(const Field& u, const Field& v);

// ∬ ∂²a(x−y) ∂|u|²(x) ∂|u|²(y) with a = |x| on plain (unwrapped) displacements,
// z = 0 excluded. Pair sums are direct up to the cap and use the equivalent
// zero-padded convolution above it.
double im_clean_lhs(const Field& u, bool zeta_correction = true, const MorawetzOptions& opt = {});
// ‖|D|^{(3−n)/2}|u|²‖² on a grid zero-padded 4× per axis.
double im_clean_rhs(const Field& u);

struct CnCalibration {
    double value;
    double extrapolation_error;
};

// Frozen output of calibrate_cn.
inline constexpr CnCalibration calibrated_cn_2d{6.28452902850, 1.85e-04};
inline constexpr CnCalibration calibrated_cn_3d{25.13273740077, 6.8e-05};
CnCalibration calibrated_cn(int dim);
// Reference bump at three resolutions, Richardson-extrapolated.
CnCalibration calibrate_cn(int dim);

struct ImClean {
    double lhs, rhs, ratio, c_n;
};
ImClean im_clean(const Field& u, const MorawetzOptions& opt = {});

struct MorawetzRow {
    double time, I, J4, K, dIdt, residual;
};

std::vector<MorawetzRow> morawetz_identity_residual(const Trajectory& u, const Trajectory& v,
                                                    const Vec3& x0, const WeightSpec& w,
                                                    const MorawetzOptions& opt = {});
// Paradifferential pair: each trajectory carries its own background context.
std::vector<MorawetzRow> morawetz_para_residual(const Trajectory& u, const ParaContext& cu,
                                                const Trajectory& v, const ParaContext& cv,
                                                const Vec3& x0, const WeightSpec& w,
                                                const MorawetzOptions& opt = {});
void write_morawetz_csv(const std::string& path, const std::vector<MorawetzRow>& rows);

} // namespace qnls
