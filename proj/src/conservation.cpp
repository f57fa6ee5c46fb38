#include "qnls/conservation.hpp"

#include "qnls/littlewood_paley.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qnls {

namespace {

std::vector<Field> gradient(const Field& f) {
    std::vector<Field> d;
    for (int j = 0; j < f.grid.dim(); ++j) d.push_back(differentiate(f, j));
    return d;
}

Field divergence(const std::vector<Field>& flux) {
    Field out(flux.at(0).grid);
    for (std::size_t j = 0; j < flux.size(); ++j) out += differentiate(flux[j], static_cast<int>(j));
    return out;
}

LedgerRow make_row(double t, const std::string& id, const Field& residual, const Field& scale) {
    const BoxGrid& g = residual.grid;
    double l1 = 0.0;
    for (const auto& v : residual.values) l1 += std::abs(v);
    return {t, id, l1 * g.cell_volume(), l2_norm(residual), max_abs(residual), l2_norm(scale)};
}

void require_stencil(const Trajectory& traj) {
    if (traj.size() < 5) throw std::invalid_argument("flux residual needs at least 5 snapshots");
    if (!traj.uniform()) throw std::invalid_argument("flux residual needs uniform snapshot spacing");
}

template <class Densities, class Pick>
Field time_derivative(const std::vector<Densities>& window, double h, Pick pick) {
    Field out(pick(window[0]).grid);
    for (int o = -2; o <= 2; ++o) {
        const double w = central_difference_weight(o) / h;
        if (w == 0.0) continue;
        const Field& f = pick(window[o + 2]);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * f[i];
    }
    return out;
}

// Density set over a trajectory with a user-supplied density map.
template <class Map>
Ledger generic_flat_residual(const Trajectory& traj, Map map) {
    require_stencil(traj);
    const int n = traj.grid.dim();
    const double h = traj.sample_spacing();
    std::vector<DensitySet> all;
    for (const auto& s : traj.snapshots) all.push_back(map(s));
    Ledger ledger;
    for (std::size_t m = 2; m + 2 < traj.size(); ++m) {
        std::vector<DensitySet> window(all.begin() + (m - 2), all.begin() + (m + 3));
        const DensitySet& c = all[m];
        Field dM = time_derivative(window, h, [](const DensitySet& d) -> const Field& { return d.M; });
        Field divP = divergence(c.P);
        ledger.push_back(make_row(traj.times[m], "mass", dM - divP, dM));
        for (int j = 0; j < n; ++j) {
            Field dP = time_derivative(window, h, [j](const DensitySet& d) -> const Field& { return d.P[j]; });
            std::vector<Field> row;
            for (int k = 0; k < n; ++k) row.push_back(c.e(j, k));
            ledger.push_back(make_row(traj.times[m], "momentum_" + std::to_string(j), dP - divergence(row), dP));
        }
    }
    return ledger;
}

} // namespace

double central_difference_weight(int offset) {
    switch (offset) {
    case -2: return 1.0 / 12.0;
    case -1: return -8.0 / 12.0;
    case 1: return 8.0 / 12.0;
    case 2: return -1.0 / 12.0;
    default: return 0.0;
    }
}

DensitySet densities(const Field& u) {
    const BoxGrid& g = u.grid;
    const int n = g.dim();
    DensitySet d(g);
    auto du = gradient(u);
    for (std::size_t i = 0; i < g.size(); ++i) d.M[i] = std::norm(u[i]);
    for (int j = 0; j < n; ++j) {
        Field p(g);
        for (std::size_t i = 0; i < g.size(); ++i) p[i] = -2.0 * (std::conj(u[i]) * du[j][i]).imag();
        d.P.push_back(std::move(p));
    }
    d.E.assign(n * n, Field(g));
    for (int j = 0; j < n; ++j)
        for (int m = j; m < n; ++m) {
            Field djm = differentiate(du[j], m);
            Field e(g);
            for (std::size_t i = 0; i < g.size(); ++i)
                e[i] = 2.0 * (du[j][i] * std::conj(du[m][i]) - std::conj(u[i]) * djm[i]).real();
            d.E[j * n + m] = e;
            d.E[m * n + j] = e;
        }
    return d;
}

Ledger flat_flux_residual(const Trajectory& traj) {
    return generic_flat_residual(traj, [](const Field& u) { return densities(u); });
}

double max_l2(const Ledger& ledger, const std::string& id_prefix) {
    double m = 0.0;
    for (const auto& r : ledger)
        if (r.id.rfind(id_prefix, 0) == 0) m = std::max(m, r.l2);
    return m;
}

void write_ledger_csv(const std::string& path, const Ledger& ledger) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(12);
    os << "time,identity,l1,l2,linf,scale\n";
    for (const auto& r : ledger)
        os << r.time << ',' << r.id << ',' << r.l1 << ',' << r.l2 << ',' << r.linf << ',' << r.flux_norm << '\n';
}

CovariantDensities covariant_densities(const Field& v, const MetricField& G, const MetricField* dGdt,
                                       const Field* f) {
    const BoxGrid& g = v.grid;
    const int n = g.dim();
    const std::size_t N = g.size();
    CovariantDensities c(g);
    auto dv = gradient(v);

    for (std::size_t i = 0; i < N; ++i) c.M[i] = std::norm(v[i]);
    for (int m = 0; m < n; ++m) {
        Field p(g);
        for (std::size_t i = 0; i < N; ++i) p[i] = -2.0 * (std::conj(v[i]) * dv[m][i]).imag();
        c.P_low.push_back(std::move(p));
    }
    for (int j = 0; j < n; ++j) {
        Field p(g);
        for (int m = 0; m < n; ++m)
            for (std::size_t i = 0; i < N; ++i) p[i] += G(j, m)[i].real() * c.P_low[m][i];
        c.P.push_back(std::move(p));
    }

    // w^k = G^{kl} ∂_l v and its gradient.
    std::vector<Field> w;
    for (int k = 0; k < n; ++k) {
        Field wk(g);
        for (int l = 0; l < n; ++l)
            for (std::size_t i = 0; i < N; ++i) wk[i] += G(k, l)[i].real() * dv[l][i];
        w.push_back(std::move(wk));
    }
    std::vector<std::vector<Field>> dw;
    for (int k = 0; k < n; ++k) dw.push_back(gradient(w[k]));

    // E^k_m and E^{kj} = G^{jm} E^k_m.
    std::vector<Field> Emixed(n * n, Field(g));
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m)
            for (std::size_t i = 0; i < N; ++i)
                Emixed[k * n + m][i] =
                    2.0 * (w[k][i] * std::conj(dv[m][i]) - std::conj(v[i]) * dw[k][m][i]).real();
    c.E.assign(n * n, Field(g));
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m)
                for (std::size_t i = 0; i < N; ++i)
                    c.E[k * n + j][i] += G(j, m)[i].real() * Emixed[k * n + m][i];

    if (f) {
        for (std::size_t i = 0; i < N; ++i) c.mass_source[i] = 2.0 * ((*f)[i] * std::conj(v[i])).imag();
    }

    c.momentum_source.assign(n, Field(g));
    if (dGdt) {
        std::vector<std::vector<Field>> dG(n * n);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) dG[a * n + b] = gradient(G(a, b));
        auto dGc = [&](int a, int b, int p) -> const Field& {
            return a <= b ? dG[a * n + b][p] : dG[b * n + a][p];
        };
        for (int j = 0; j < n; ++j) {
            Field& s = c.momentum_source[j];
            for (std::size_t i = 0; i < N; ++i) {
                double acc = 0.0;
                for (int m = 0; m < n; ++m) {
                    acc += (*dGdt)(j, m)[i].real() * c.P_low[m][i].real();
                    for (int k = 0; k < n; ++k) acc -= dGc(j, m, k)[i].real() * Emixed[k * n + m][i].real();
                }
                cplx cross = 0.0;
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double djG = 0.0;
                        for (int p = 0; p < n; ++p) djG += G(j, p)[i].real() * dGc(k, l, p)[i].real();
                        cross += std::conj(dv[k][i]) * djG * dv[l][i];
                    }
                s[i] = acc + 2.0 * cross.real();
            }
        }
    }
    if (f) {
        auto df = gradient(*f);
        for (int j = 0; j < n; ++j)
            for (std::size_t i = 0; i < N; ++i) {
                cplx up_f = 0.0, up_v = 0.0;
                for (int l = 0; l < n; ++l) {
                    up_f += G(j, l)[i].real() * df[l][i];
                    up_v += G(j, l)[i].real() * dv[l][i];
                }
                c.momentum_source[j][i] +=
                    2.0 * (std::conj(v[i]) * up_f - (*f)[i] * std::conj(up_v)).real();
            }
    }
    return c;
}

MetricField ParaContext::metric(double t) const {
    return truncated_metric(*model, background->at(t), k);
}

MetricField ParaContext::metric_rate(double t, double h) const {
    MetricField out;
    for (int o = -2; o <= 2; ++o) {
        const double w = central_difference_weight(o) / h;
        if (w == 0.0) continue;
        MetricField G = metric(t + o * h);
        if (out.comp.empty()) {
            out.n = G.n;
            out.comp.assign(G.comp.size(), Field(G.comp[0].grid));
        }
        for (std::size_t c = 0; c < G.comp.size(); ++c)
            for (std::size_t i = 0; i < G.comp[c].size(); ++i) out.comp[c][i] += w * G.comp[c][i];
    }
    return out;
}

Ledger para_flux_residual(const Trajectory& v, const ParaContext& ctx) {
    require_stencil(v);
    const int n = v.grid.dim();
    const double h = v.sample_spacing();
    std::vector<MetricField> metrics;
    for (double t : v.times) metrics.push_back(ctx.metric(t));
    std::vector<CovariantDensities> all;
    for (std::size_t m = 0; m < v.size(); ++m)
        all.push_back(covariant_densities(v.snapshots[m], metrics[m], nullptr, nullptr));

    Ledger ledger;
    for (std::size_t m = 2; m + 2 < v.size(); ++m) {
        const double t = v.times[m];
        MetricField dGdt = ctx.metric_rate(t, h);
        Field fm(v.grid);
        if (ctx.f) fm = ctx.f(t);
        CovariantDensities c = covariant_densities(v.snapshots[m], metrics[m], &dGdt, ctx.f ? &fm : nullptr);
        std::vector<CovariantDensities> window(all.begin() + (m - 2), all.begin() + (m + 3));

        Field dM = time_derivative(window, h, [](const CovariantDensities& d) -> const Field& { return d.M; });
        ledger.push_back(make_row(t, "mass", dM - divergence(c.P) - c.mass_source, dM));
        for (int j = 0; j < n; ++j) {
            Field dP = time_derivative(window, h, [j](const CovariantDensities& d) -> const Field& { return d.P[j]; });
            std::vector<Field> col;
            for (int k = 0; k < n; ++k) col.push_back(c.E[k * n + j]);
            Field r = dP - divergence(col) - c.momentum_source[j];
            ledger.push_back(make_row(t, "momentum_" + std::to_string(j), r, dP));
        }
    }
    return ledger;
}

cplx BilinearSymbol::operator()(const Vec3& xi, const Vec3& eta) const {
    cplx s = 0.0;
    for (const auto& [a, b] : terms) s += (a ? a(xi) : cplx(1.0)) * (b ? b(eta) : cplx(1.0));
    return s;
}

BilinearSymbol BilinearSymbol::unit() {
    BilinearSymbol a;
    a.terms.push_back({SlotFactor{}, SlotFactor{}});
    return a;
}

BilinearSymbol BilinearSymbol::shell(const BoxGrid& g, int k) {
    auto bank = std::make_shared<DyadicFilterBank>(g);
    if (k < 1 || k > bank->shells()) throw std::out_of_range("shell index");
    SlotFactor p = [bank, k](const Vec3& xi) {
        return cplx(bank->shell_weight(k, std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])));
    };
    BilinearSymbol a;
    a.terms.push_back({p, p});
    return a;
}

void require_hermitian(const BilinearSymbol& a, const BoxGrid& g, double tol) {
    const int n = g.dim();
    const int r = std::min(3, g.n() / 2 - 1);
    std::vector<Vec3> pts;
    std::array<int, 3> m{0, 0, 0};
    const int side = 2 * r + 1;
    int count = 1;
    for (int j = 0; j < n; ++j) count *= side;
    for (int c = 0; c < count; ++c) {
        int q = c;
        Vec3 xi{0, 0, 0};
        for (int j = 0; j < n; ++j) {
            m[j] = q % side - r;
            q /= side;
            xi[j] = m[j] * g.k0();
        }
        pts.push_back(xi);
    }
    double worst = 0.0, scale = 0.0;
    for (const auto& x : pts)
        for (const auto& y : pts) {
            cplx ab = a(x, y), ba = a(y, x);
            worst = std::max(worst, std::abs(ba - std::conj(ab)));
            scale = std::max(scale, std::abs(ab));
        }
    if (worst > tol * std::max(1.0, scale))
        throw std::invalid_argument("bilinear symbol is not Hermitian: defect " + std::to_string(worst));
}

DensitySet weighted_densities(const Field& u, const BilinearSymbol& a) {
    require_hermitian(a, u.grid);
    const BoxGrid& g = u.grid;
    const int n = g.dim();
    const std::size_t N = g.size();
    DensitySet d(g);
    d.P.assign(n, Field(g));
    d.E.assign(n * n, Field(g));
    for (const auto& [alpha, beta] : a.terms) {
        Field A = alpha ? apply_multiplier(u, alpha) : u;
        Field B = beta ? apply_multiplier(u, [&beta](const Vec3& xi) { return std::conj(beta(xi)); }) : u;
        auto dA = gradient(A);
        auto dB = gradient(B);
        for (std::size_t i = 0; i < N; ++i) d.M[i] += A[i] * std::conj(B[i]);
        for (int j = 0; j < n; ++j)
            for (std::size_t i = 0; i < N; ++i)
                d.P[j][i] += cplx(0.0, 1.0) * (std::conj(B[i]) * dA[j][i] - A[i] * std::conj(dB[j][i]));
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                Field d2A = differentiate(dA[j], m);
                Field d2B = differentiate(dB[j], m);
                for (std::size_t i = 0; i < N; ++i)
                    d.E[j * n + m][i] += dA[j][i] * std::conj(dB[m][i]) + dA[m][i] * std::conj(dB[j][i]) -
                                         std::conj(B[i]) * d2A[i] - A[i] * std::conj(d2B[i]);
            }
    }
    // Hermitian symbols give real densities; keep the real part and record the rest.
    double residue = 0.0;
    auto take_real = [&residue](Field& f) {
        for (auto& v : f.values) {
            residue = std::max(residue, std::abs(v.imag()));
            v = v.real();
        }
    };
    take_real(d.M);
    for (auto& p : d.P) take_real(p);
    for (auto& e : d.E) take_real(e);
    d.imag_residue = residue;
    return d;
}

Ledger weighted_flux_residual(const Trajectory& traj, const BilinearSymbol& a) {
    require_hermitian(a, traj.grid);
    return generic_flat_residual(traj, [&a](const Field& u) { return weighted_densities(u, a); });
}

} // namespace qnls
