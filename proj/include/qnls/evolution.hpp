#pragma once

#include "qnls/model.hpp"
#include "qnls/spectral.hpp"
#include "qnls/trajectory.hpp"

#include <functional>
#include <memory>
#include <stdexcept>

namespace qnls {

class NumericalAbort : public std::runtime_error {
public:
    NumericalAbort(const std::string& what, std::shared_ptr<Trajectory> partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const std::shared_ptr<Trajectory>& partial() const { return partial_; }

private:
    std::shared_ptr<Trajectory> partial_;
};

struct SolverOptions {
    double T = 1.0;
    double dt = 1e-3; // sign follows T; a negative T integrates backward
    int stride = 1;
    bool divergence_form = true;
    bool dealias = true;
    bool skip_checks = false; // bypasses validate_cubic and the smallness bound
    double eps_max = 1.0;     // bound on ‖u₀‖_{H^s}
    double s = 1.0;
    double cfl_c = 0.5;
    double alias_tol = 1e-8;
};

using Forcing = std::function<Field(double t)>;

Trajectory solve_flat(const Field& u0, double T, double dt, int stride = 1);

// u_t = iΔu + i[∂_j((g(u)−I)^{jk}∂_k u) − N(u,∇u)] by Lawson RK4.
Trajectory solve_qnls(const ModelSpec& m, const Field& u0, const SolverOptions& opt);

// v_t = i∂_j(g_[<λ]^{jk}∂_k v) − i f, λ = 2^k, with g_[<λ] refreshed from the background.
Trajectory solve_paradifferential(const ModelSpec& m, const Trajectory& background, const Field& v0,
                                  const Forcing& f, int k, const SolverOptions& opt);

// Fréchet derivative of the full right-hand side at the background solution.
Trajectory solve_linearized(const ModelSpec& m, const Trajectory& background, const Field& v0,
                            const SolverOptions& opt);

} // namespace qnls
