#include "qnls/evolution.hpp"

#include "qnls/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace qnls {

namespace {

// Spectral remainder R(t, Û) of the split u_t = iΔu + R, dealiased; reports the
// fraction of the raw remainder's spectral mass above the 2/3 cutoff.
using Remainder = std::function<CVec(double t, const CVec& uhat, double& alias)>;

CVec physical(const BoxGrid& g, const CVec& hat) {
    CVec out(g.size());
    fft_inverse(g, hat.data(), out.data());
    return out;
}

CVec spectral(const BoxGrid& g, const CVec& phys) {
    CVec out(g.size());
    fft_forward(g, phys.data(), out.data());
    return out;
}

CVec derivative_hat(const BoxGrid& g, const CVec& hat, int axis) {
    CVec d(hat.size());
    for (std::size_t i = 0; i < hat.size(); ++i) d[i] = cplx(0.0, g.wavenumber(i)[axis]) * hat[i];
    return d;
}

// Physical gradient and (optionally) Hessian of the state.
struct Derivs {
    CVec u;
    std::vector<CVec> du;
    std::vector<CVec> d2u; // j*n+k
};

Derivs derivs(const BoxGrid& g, const CVec& hat, bool want_grad, bool want_hess) {
    Derivs d;
    d.u = physical(g, hat);
    const int n = g.dim();
    if (want_grad || want_hess)
        for (int j = 0; j < n; ++j) d.du.push_back(physical(g, derivative_hat(g, hat, j)));
    if (want_hess) {
        d.d2u.assign(n * n, CVec());
        for (int j = 0; j < n; ++j) {
            CVec dj = derivative_hat(g, hat, j);
            for (int k = j; k < n; ++k) {
                d.d2u[j * n + k] = physical(g, derivative_hat(g, dj, k));
                if (k != j) d.d2u[k * n + j] = d.d2u[j * n + k];
            }
        }
    }
    return d;
}

// i[∂_j flux_j − source] in spectral form.
CVec assemble(const BoxGrid& g, const std::vector<CVec>& flux, const CVec& source, bool dealias,
              double& alias) {
    CVec out = source.empty() ? CVec(g.size(), 0.0) : spectral(g, source);
    for (auto& v : out) v = -v;
    for (std::size_t j = 0; j < flux.size(); ++j) {
        if (flux[j].empty()) continue;
        CVec fh = spectral(g, flux[j]);
        for (std::size_t i = 0; i < fh.size(); ++i) out[i] += cplx(0.0, g.wavenumber(i)[j]) * fh[i];
    }
    double total = 0.0, excess = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double w = std::norm(out[i]);
        total += w;
        if (!dealias_keep(g, i)) {
            excess += w;
            if (dealias) out[i] = 0.0;
        }
        out[i] *= cplx(0.0, 1.0);
    }
    alias = total > 0.0 ? excess / total : 0.0;
    return out;
}

double norm_sq(const CVec& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return s;
}

// Lawson RK4 driver; post(Û) is applied after every step (e.g. shell re-projection).
Trajectory lawson_rk4(const Field& u0, double T, double dt, int stride, const Remainder& R,
                      const std::string& scheme, double alias_tol,
                      const std::function<void(CVec&)>& post = {}) {
    const BoxGrid& g = u0.grid;
    if (dt == 0.0) throw std::invalid_argument("solver: dt must be nonzero");
    if (T != 0.0 && (T > 0) != (dt > 0)) dt = -dt;
    const double ratio = T / dt;
    const long steps = std::lround(ratio);
    if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, std::abs(ratio)))
        throw std::invalid_argument("solver: T must be an integer multiple of dt");
    if (stride < 1) throw std::invalid_argument("solver: stride must be positive");

    auto traj = std::make_shared<Trajectory>(g);
    traj->dt = dt;
    traj->stride = stride;
    traj->scheme = scheme;

    CVec eh(g.size()), eh2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        eh[i] = std::polar(1.0, -dt * g.wavenumber_sq(i));
        eh2[i] = std::polar(1.0, -0.5 * dt * g.wavenumber_sq(i));
    }
    auto mul = [](const CVec& e, const CVec& v) {
        CVec r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) r[i] = e[i] * v[i];
        return r;
    };

    CVec U = spectral(g, u0.values);
    if (post) post(U);
    traj->append(0.0, Field(g, physical(g, U)));
    traj->meta["initial_alias_fraction"] = dealias_excess_fraction(SpectralRep(g, U));

    double worst_alias = 0.0;
    std::size_t flags = 0;
    const double h = dt;
    for (long n = 0; n < steps; ++n) {
        const double t = n * dt;
        double a1, a2, a3, a4;
        CVec k1 = R(t, U, a1);
        CVec s2(U.size());
        for (std::size_t i = 0; i < U.size(); ++i) s2[i] = eh2[i] * (U[i] + 0.5 * h * k1[i]);
        CVec k2 = R(t + 0.5 * h, s2, a2);
        CVec EU2 = mul(eh2, U);
        CVec s3(U.size());
        for (std::size_t i = 0; i < U.size(); ++i) s3[i] = EU2[i] + 0.5 * h * k2[i];
        CVec k3 = R(t + 0.5 * h, s3, a3);
        CVec s4(U.size());
        for (std::size_t i = 0; i < U.size(); ++i) s4[i] = eh[i] * U[i] + h * eh2[i] * k3[i];
        CVec k4 = R(t + h, s4, a4);

        const double before = norm_sq(U);
        for (std::size_t i = 0; i < U.size(); ++i)
            U[i] = eh[i] * U[i] +
                   h / 6.0 * (eh[i] * k1[i] + 2.0 * eh2[i] * (k2[i] + k3[i]) + k4[i]);
        if (post) post(U);
        const double after = norm_sq(U);

        const double alias = std::max({a1, a2, a3, a4});
        worst_alias = std::max(worst_alias, alias);
        if (alias > alias_tol) ++flags;
        if (!std::isfinite(after) || (before > 0.0 && after > 100.0 * before)) {
            traj->alias_flags = flags;
            traj->max_alias_fraction = worst_alias;
            std::ostringstream os;
            os << "step blow-up at t = " << t + h << " (L2 growth above 10x)";
            throw NumericalAbort(os.str(), traj);
        }
        if ((n + 1) % stride == 0 || n + 1 == steps)
            traj->append((n + 1) * dt, Field(g, physical(g, U)));
    }
    traj->alias_flags = flags;
    traj->max_alias_fraction = worst_alias;
    return std::move(*traj);
}

double cfl_advisory(const ModelSpec& m, const Field& u0, double c) {
    double dev = 0.0;
    for (const auto& v : u0.values) {
        Mat3 g = m.metric.eval(v);
        for (int j = 0; j < m.dim; ++j)
            for (int l = 0; l < m.dim; ++l) dev = std::max(dev, std::abs(g[j * 3 + l] - (j == l)));
    }
    const double xm = u0.grid.xi_max();
    return dev > 0.0 ? c / (dev * xm * xm) : INFINITY;
}

void check_model_and_data(const ModelSpec& m, const Field& u0, const SolverOptions& opt) {
    if (m.dim != u0.grid.dim()) throw std::invalid_argument("solver: model and grid dimensions differ");
    if (opt.skip_checks) return;
    CubicValidation cv = validate_cubic(m);
    if (!cv.pass) throw std::invalid_argument("solver: model fails the cubic validator");
    if (sobolev_norm(u0, opt.s) > opt.eps_max)
        throw std::invalid_argument("solver: data exceed the configured smallness bound");
}

} // namespace

Trajectory solve_flat(const Field& u0, double T, double dt, int stride) {
    if (dt == 0.0) throw std::invalid_argument("solve_flat: dt must be nonzero");
    if (T != 0.0 && (T > 0) != (dt > 0)) dt = -dt;
    const double ratio = T / dt;
    const long steps = std::lround(ratio);
    if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, std::abs(ratio)))
        throw std::invalid_argument("solve_flat: T must be an integer multiple of dt");
    Trajectory tr(u0.grid);
    tr.dt = dt;
    tr.stride = stride;
    tr.scheme = "flat-exact";
    SpectralRep U = to_spectral(u0);
    for (long n = 0; n <= steps; ++n) {
        if (n % stride != 0 && n != steps) continue;
        const double t = n * dt;
        SpectralRep V = U;
        for (std::size_t i = 0; i < V.coeffs.size(); ++i)
            V.coeffs[i] *= std::polar(1.0, -t * u0.grid.wavenumber_sq(i));
        tr.append(t, to_physical(V));
    }
    return tr;
}

Trajectory solve_qnls(const ModelSpec& m, const Field& u0, const SolverOptions& opt) {
    check_model_and_data(m, u0, opt);
    const BoxGrid g = u0.grid;
    const int n = g.dim();
    const bool metric = !m.metric.is_identity();
    const bool grad = metric || m.N.needs_gradient();
    const bool hess = metric && !opt.divergence_form;

    Remainder R = [&, g, n](double, const CVec& U, double& alias) {
        Derivs d = derivs(g, U, grad, hess);
        std::vector<CVec> flux;
        CVec source(g.size(), 0.0);
        if (metric && opt.divergence_form) flux.assign(n, CVec(g.size(), 0.0));
        cplx du[3];
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (int j = 0; j < n && grad; ++j) du[j] = d.du[j][i];
            if (!m.N.empty()) source[i] = m.N.eval(d.u[i], du);
            if (!metric) continue;
            Mat3 gm = m.metric.eval(d.u[i]);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double a = gm[j * 3 + k] - (j == k ? 1.0 : 0.0);
                    if (opt.divergence_form)
                        flux[j][i] += a * du[k];
                    else
                        source[i] -= a * d.d2u[j * n + k][i];
                }
        }
        return assemble(g, flux, source, opt.dealias, alias);
    };
    Trajectory tr = lawson_rk4(u0, opt.T, opt.dt, opt.stride, R, "lawson-rk4", opt.alias_tol);
    tr.meta["model"] = m.to_json();
    tr.meta["form"] = opt.divergence_form ? "divergence" : "nondivergence";
    const double adv = cfl_advisory(m, u0, opt.cfl_c);
    tr.meta["cfl_advisory_dt"] = std::isfinite(adv) ? nlohmann::json(adv) : nlohmann::json(nullptr);
    tr.meta["cfl_advisory_exceeded"] = std::abs(opt.dt) > adv;
    return tr;
}

Trajectory solve_paradifferential(const ModelSpec& m, const Trajectory& background, const Field& v0,
                                  const Forcing& f, int k, const SolverOptions& opt) {
    require_same_grid(background.grid, v0.grid);
    const BoxGrid g = v0.grid;
    const int n = g.dim();
    DyadicFilterBank bank(g);
    Field vk = bank.project(v0, k);

    // Truncated metric cache keyed by stage time.
    auto cache = std::make_shared<std::map<double, MetricField>>();
    auto metric_at = [&, cache](double t) -> const MetricField& {
        auto it = cache->find(t);
        if (it != cache->end()) return it->second;
        if (cache->size() > 8) cache->erase(cache->begin());
        return cache->emplace(t, truncated_metric(m, background.at(t), k)).first->second;
    };
    const bool metric = !m.metric.is_identity();

    Remainder R = [&, g, n](double t, const CVec& U, double& alias) {
        std::vector<CVec> flux;
        CVec source;
        if (metric) {
            const MetricField& G = metric_at(t);
            Derivs d = derivs(g, U, true, false);
            flux.assign(n, CVec(g.size(), 0.0));
            for (std::size_t i = 0; i < g.size(); ++i)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l) {
                        const double a = G(j, l)[i].real() - (j == l ? 1.0 : 0.0);
                        flux[j][i] += a * d.du[l][i];
                    }
        }
        if (f) source = f(t).values;
        return assemble(g, flux, source, opt.dealias, alias);
    };

    // Re-projection onto [λ/4, 4λ] after every step.
    CVec window(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = std::sqrt(g.wavenumber_sq(i));
        double w = 0.0;
        for (int j = k - 2; j <= k + 2; ++j)
            if (j >= 1 && j <= bank.shells()) w += bank.shell_weight(j, r);
        window[i] = w;
    }
    auto leaked = std::make_shared<double>(0.0);
    auto post = [window, leaked, &g](CVec& U) {
        double before = 0.0, after = 0.0;
        for (std::size_t i = 0; i < U.size(); ++i) {
            before += std::norm(U[i]);
            U[i] *= window[i];
            after += std::norm(U[i]);
        }
        *leaked += (before - after) * g.volume();
    };
    Trajectory tr = lawson_rk4(vk, opt.T, opt.dt, opt.stride, R, "lawson-rk4-para", opt.alias_tol, post);
    tr.meta["model"] = m.to_json();
    tr.meta["shell"] = k;
    tr.meta["leaked_mass"] = *leaked;
    return tr;
}

Trajectory solve_linearized(const ModelSpec& m, const Trajectory& background, const Field& v0,
                            const SolverOptions& opt) {
    require_same_grid(background.grid, v0.grid);
    const BoxGrid g = v0.grid;
    const int n = g.dim();
    const bool metric = !m.metric.is_identity();
    const bool grad = metric || m.N.needs_gradient();
    const bool hess = metric && !opt.divergence_form;

    auto bg_cache = std::make_shared<std::map<double, Derivs>>();
    auto bg_at = [&, bg_cache](double t) -> const Derivs& {
        auto it = bg_cache->find(t);
        if (it != bg_cache->end()) return it->second;
        if (bg_cache->size() > 8) bg_cache->erase(bg_cache->begin());
        Field u = background.at(t);
        return bg_cache->emplace(t, derivs(g, spectral(g, u.values), grad, hess)).first->second;
    };

    Remainder R = [&, g, n](double t, const CVec& V, double& alias) {
        const Derivs& b = bg_at(t);
        Derivs d = derivs(g, V, grad, hess);
        std::vector<CVec> flux;
        CVec source(g.size(), 0.0);
        if (metric && opt.divergence_form) flux.assign(n, CVec(g.size(), 0.0));
        cplx du[3], dv[3];
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (int j = 0; j < n && grad; ++j) {
                du[j] = b.du[j][i];
                dv[j] = d.du[j][i];
            }
            if (!m.N.empty()) source[i] = m.N.deriv(b.u[i], du, d.u[i], dv);
            if (!metric) continue;
            Mat3 gm = m.metric.eval(b.u[i]);
            Mat3 dg = m.metric.deriv(b.u[i], d.u[i]);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double a = gm[j * 3 + k] - (j == k ? 1.0 : 0.0);
                    const double da = dg[j * 3 + k];
                    if (opt.divergence_form)
                        flux[j][i] += da * du[k] + a * dv[k];
                    else
                        source[i] -= da * b.d2u[j * n + k][i] + a * d.d2u[j * n + k][i];
                }
        }
        return assemble(g, flux, source, opt.dealias, alias);
    };
    Trajectory tr = lawson_rk4(v0, opt.T, opt.dt, opt.stride, R, "lawson-rk4-linearized", opt.alias_tol);
    tr.meta["model"] = m.to_json();
    return tr;
}

} // namespace qnls
