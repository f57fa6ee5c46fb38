#include "qnls/morawetz.hpp"

#include "qnls/parallel.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace qnls {

namespace {

// Regularized lattice sums Σ'|m|^{-1} over Z² and Z³.
constexpr double zeta_lattice_2d = -3.900264920001956;
constexpr double zeta_lattice_3d = -2.8372974794806;

std::mutex warn_mutex;
std::vector<SupportWarning> warnings;

int effective_cap(const BoxGrid& g, const MorawetzOptions& opt) {
    if (opt.cap > 0) return opt.cap;
    return g.dim() == 1 ? 1024 : g.dim() == 2 ? 32 : 16;
}

void require_cap(const BoxGrid& g, const MorawetzOptions& opt) {
    if (g.n() > effective_cap(g, opt))
        throw std::invalid_argument("grid of " + std::to_string(g.n()) + " points per axis exceeds the pair-sum cap " +
                                    std::to_string(effective_cap(g, opt)));
}

// Minimal-image sums need the mass inside the half box; plain displacements only
// need decay towards the box edge.
void support_check(const Field& f, const WeightSpec& w, const MorawetzOptions& opt, const char* name) {
    if (!w.minimal_image && w.kind == WeightKind::quadratic) return;
    const double half_width = w.minimal_image ? 0.25 : 0.375;
    const double frac = central_mass_fraction(f, half_width);
    if (frac >= opt.support_fraction) return;
    std::string msg = std::string(name) + " keeps only " + std::to_string(frac) +
                      " of its mass inside |x_j| < " + std::to_string(half_width) + " L";
    if (opt.strict_support) throw std::invalid_argument(msg);
    std::lock_guard<std::mutex> lock(warn_mutex);
    warnings.push_back({msg});
}

// Real densities for one side of a pair sum.
struct Pack {
    int n = 0;
    RVec M;
    std::vector<RVec> P;
    std::vector<RVec> E; // E[j*n+m]
    RVec Fm;
    std::vector<RVec> Fp;
};

RVec real_of(const Field& f) {
    RVec r(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = f[i].real();
    return r;
}

Pack pack(const DensitySet& d) {
    Pack p;
    p.n = d.M.grid.dim();
    p.M = real_of(d.M);
    for (const auto& f : d.P) p.P.push_back(real_of(f));
    for (const auto& f : d.E) p.E.push_back(real_of(f));
    return p;
}

Pack pack(const CovariantDensities& c, const Vec3* shift) {
    auto tr = [shift](const Field& f) { return real_of(shift ? real_part(translate(f, *shift)) : f); };
    Pack p;
    p.n = c.M.grid.dim();
    p.M = tr(c.M);
    for (const auto& f : c.P) p.P.push_back(tr(f));
    for (const auto& f : c.E) p.E.push_back(tr(f));
    p.Fm = tr(c.mass_source);
    for (const auto& f : c.momentum_source) p.Fp.push_back(tr(f));
    return p;
}

// Σ_x Σ_y body(x, y, z) h^{2n}, skipping z = 0 for singular weights.
template <class Body>
double pair_sum(const BoxGrid& g, const WeightSpec& w, Body body) {
    const std::size_t N = g.size();
    const int n = g.dim();
    std::vector<Vec3> pts(N);
    for (std::size_t i = 0; i < N; ++i) pts[i] = g.point(i);
    RVec partial(N, 0.0);
    const bool skip = w.singular_at_origin();
    parallel_for(N, [&](std::size_t x) {
        double acc = 0.0;
        for (std::size_t y = 0; y < N; ++y) {
            if (skip && x == y) continue;
            acc += body(x, y, w.displacement(pts[x], pts[y], n, g.length()));
        }
        partial[x] = acc;
    });
    double s = 0.0;
    for (double v : partial) s += v;
    const double h = g.cell_volume();
    return s * h * h;
}

// ∬ a_j [A(x) B_j(y) − C_j(x) D(y)]
double gradient_pairing(const BoxGrid& g, const WeightSpec& w, const RVec& A, const std::vector<RVec>& B,
                        const std::vector<RVec>& C, const RVec& D) {
    const int n = g.dim();
    return pair_sum(g, w, [&](std::size_t x, std::size_t y, const Vec3& z) {
        Vec3 a = w.gradient(z, n);
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += a[j] * (A[x] * B[j][y] - C[j][x] * D[y]);
        return s;
    });
}

// ∬ a_jm [M(u)E_jm(v) + E_jm(u)M(v) − P_m(u)P_j(v) − P_j(u)P_m(v)]
double hessian_pairing(const BoxGrid& g, const WeightSpec& w, const Pack& u, const Pack& v) {
    const int n = g.dim();
    return pair_sum(g, w, [&](std::size_t x, std::size_t y, const Vec3& z) {
        Mat3 a = w.hessian(z, n);
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                const double t = u.M[x] * v.E[j * n + m][y] + u.E[j * n + m][x] * v.M[y] -
                                 u.P[m][x] * v.P[j][y] - u.P[j][x] * v.P[m][y];
                s += a[j * 3 + m] * t;
            }
        return s;
    });
}

// x − y lies in (−L, L); exact half-box offsets keep their sign so the wrap stays odd.
double wrap(double d, double L) {
    if (d > 0.5 * L) return d - L;
    if (d < -0.5 * L) return d + L;
    return d;
}

} // namespace

std::vector<SupportWarning> take_support_warnings() {
    std::lock_guard<std::mutex> lock(warn_mutex);
    std::vector<SupportWarning> out;
    out.swap(warnings);
    return out;
}

WeightSpec WeightSpec::absolute() { return WeightSpec{}; }

WeightSpec WeightSpec::quadratic(bool minimal_image) {
    WeightSpec w;
    w.kind = WeightKind::quadratic;
    w.minimal_image = minimal_image;
    return w;
}

WeightSpec WeightSpec::custom(std::function<double(double)> d1, std::function<double(double)> d2,
                              bool minimal_image) {
    WeightSpec w;
    w.kind = WeightKind::custom;
    w.minimal_image = minimal_image;
    w.d1 = std::move(d1);
    w.d2 = std::move(d2);
    return w;
}

Vec3 WeightSpec::displacement(const Vec3& x, const Vec3& y, int n, double L) const {
    Vec3 z{0, 0, 0};
    for (int j = 0; j < n; ++j) z[j] = minimal_image ? wrap(x[j] - y[j], L) : x[j] - y[j];
    return z;
}

Vec3 WeightSpec::gradient(const Vec3& z, int n) const {
    Vec3 g{0, 0, 0};
    if (kind == WeightKind::quadratic) {
        for (int j = 0; j < n; ++j) g[j] = 2.0 * z[j];
        return g;
    }
    double r2 = 0.0;
    for (int j = 0; j < n; ++j) r2 += z[j] * z[j];
    if (r2 == 0.0) return g;
    const double r = std::sqrt(r2);
    const double a1 = kind == WeightKind::abs ? 1.0 : d1(r);
    for (int j = 0; j < n; ++j) g[j] = a1 * z[j] / r;
    return g;
}

Mat3 WeightSpec::hessian(const Vec3& z, int n) const {
    Mat3 H{};
    if (kind == WeightKind::quadratic) {
        for (int j = 0; j < n; ++j) H[j * 3 + j] = 2.0;
        return H;
    }
    double r2 = 0.0;
    for (int j = 0; j < n; ++j) r2 += z[j] * z[j];
    if (r2 == 0.0) {
        if (kind == WeightKind::custom)
            for (int j = 0; j < n; ++j) H[j * 3 + j] = d2(0.0);
        return H; // abs: excluded by the pair sums
    }
    const double r = std::sqrt(r2);
    const double a1 = kind == WeightKind::abs ? 1.0 : d1(r);
    const double a2 = kind == WeightKind::abs ? 0.0 : d2(r);
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
            const double zz = z[j] * z[m] / r2;
            H[j * 3 + m] = a2 * zz + (a1 / r) * ((j == m ? 1.0 : 0.0) - zz);
        }
    return H;
}

double interaction_functional(const Field& u, const Field& v, const Vec3& x0, const WeightSpec& w,
                              const MorawetzOptions& opt) {
    require_same_grid(u.grid, v.grid);
    require_cap(u.grid, opt);
    Field vs = translate(v, x0);
    support_check(u, w, opt, "u");
    support_check(vs, w, opt, "shifted v");
    Pack pu = pack(densities(u)), pv = pack(densities(vs));
    return gradient_pairing(u.grid, w, pu.M, pv.P, pu.P, pv.M);
}

double j4(const Field& u, const Field& v, const Vec3& x0, const WeightSpec& w, const MorawetzOptions& opt) {
    require_same_grid(u.grid, v.grid);
    require_cap(u.grid, opt);
    Field vs = translate(v, x0);
    support_check(u, w, opt, "u");
    support_check(vs, w, opt, "shifted v");
    return hessian_pairing(u.grid, w, pack(densities(u)), pack(densities(vs)));
}

double j4_main(const Field& u, const Field& v, const Vec3& x0, const WeightSpec& w,
               const MorawetzOptions& opt) {
    require_same_grid(u.grid, v.grid);
    require_cap(u.grid, opt);
    const BoxGrid& g = u.grid;
    const int n = g.dim();
    Field vs = translate(v, x0);
    support_check(u, w, opt, "u");
    support_check(vs, w, opt, "shifted v");
    std::vector<Field> du, dv;
    for (int j = 0; j < n; ++j) {
        du.push_back(differentiate(u, j));
        dv.push_back(differentiate(vs, j));
    }
    return 4.0 * pair_sum(g, w, [&](std::size_t x, std::size_t y, const Vec3& z) {
        Mat3 a = w.hessian(z, n);
        cplx F[3];
        for (int j = 0; j < n; ++j) F[j] = u[x] * std::conj(dv[j][y]) + du[j][x] * std::conj(vs[y]);
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) s += a[j * 3 + k] * (F[j] * std::conj(F[k])).real();
        return s;
    });
}

double j4_quadratic_closed(const Field& u, const Field& v) {
    require_same_grid(u.grid, v.grid);
    const int n = u.grid.dim();
    double gu = 0.0, gv = 0.0, pp = 0.0;
    for (int j = 0; j < n; ++j) {
        Field duj = differentiate(u, j), dvj = differentiate(v, j);
        gu += l2_norm_sq(duj);
        gv += l2_norm_sq(dvj);
        pp += inner(u, duj).imag() * inner(v, dvj).imag();
    }
    return 8.0 * (gu * l2_norm_sq(v) + l2_norm_sq(u) * gv - 2.0 * pp);
}

double im_clean_lhs(const Field& u, bool zeta_correction, const MorawetzOptions& opt) {
    const BoxGrid& g = u.grid;
    const int n = g.dim();
    if (n < 2) throw std::invalid_argument("the clean interaction identity needs n >= 2");
    WeightSpec w = WeightSpec::absolute();
    w.minimal_image = false;
    support_check(u, w, opt, "u");
    Field rho(g);
    for (std::size_t i = 0; i < g.size(); ++i) rho[i] = std::norm(u[i]);
    std::vector<RVec> d;
    for (int j = 0; j < n; ++j) d.push_back(real_of(differentiate(rho, j)));

    double lhs = 0.0;
    if (g.n() <= effective_cap(g, opt)) {
        lhs = pair_sum(g, w, [&](std::size_t x, std::size_t y, const Vec3& z) {
            Mat3 a = w.hessian(z, n);
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                for (int m = 0; m < n; ++m) s += a[j * 3 + m] * d[j][x] * d[m][y];
            return s;
        });
    } else {
        // The same sum as a convolution with the kernel table; plain displacements
        // are zero-padded so the circular product is a linear one.
        const BoxGrid G = w.minimal_image ? g : BoxGrid(n, 2 * g.n(), 2 * g.length(), std::size_t(1) << 24);
        const std::size_t N = G.size();
        const double h = g.spacing();
        std::vector<std::size_t> embed(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) embed[i] = G.flatten(g.unflatten(i));
        std::vector<CVec> grad_hat(n, CVec(N));
        for (int m = 0; m < n; ++m) {
            CVec tmp(N, 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) tmp[embed[i]] = d[m][i];
            fft_forward(G, tmp.data(), grad_hat[m].data());
        }
        for (int j = 0; j < n; ++j) {
            CVec conv_hat(N, 0.0);
            for (int m = 0; m < n; ++m) {
                CVec K(N, 0.0), Kh(N);
                for (std::size_t i = 1; i < N; ++i) {
                    auto idx = G.unflatten(i);
                    Vec3 z{0, 0, 0};
                    for (int a = 0; a < n; ++a) z[a] = G.mode_index(idx[a]) * h;
                    K[i] = w.hessian(z, n)[j * 3 + m];
                }
                fft_forward(G, K.data(), Kh.data());
                for (std::size_t i = 0; i < N; ++i) conv_hat[i] += static_cast<double>(N) * Kh[i] * grad_hat[m][i];
            }
            CVec conv(N);
            fft_inverse(G, conv_hat.data(), conv.data());
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += d[j][i] * conv[embed[i]].real();
            lhs += s * g.cell_volume() * g.cell_volume();
        }
    }
    if (zeta_correction) {
        const double z = n == 2 ? 0.5 * zeta_lattice_2d : (2.0 / 3.0) * zeta_lattice_3d;
        double self = 0.0;
        for (int j = 0; j < n; ++j)
            for (double v : d[j]) self += v * v;
        self *= g.cell_volume();
        lhs -= std::pow(g.spacing(), n - 1) * z * self;
    }
    return lhs;
}

double im_clean_rhs(const Field& u) {
    const BoxGrid& g = u.grid;
    const int n = g.dim();
    if (n < 2 || n > 3) throw std::invalid_argument("the clean interaction identity needs n = 2 or 3");
    Field rho(g);
    for (std::size_t i = 0; i < g.size(); ++i) rho[i] = std::norm(u[i]);
    if (n == 3) return l2_norm_sq(rho);
    // Zero padding keeps the sample spacing and emulates the whole plane.
    const int P = 4;
    BoxGrid big(n, P * g.n(), P * g.length(), std::size_t(1) << 24);
    Field rb(big);
    const int off = (P - 1) * g.n() / 2;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        for (int j = 0; j < n; ++j) idx[j] += off;
        rb[big.flatten(idx)] = rho[i];
    }
    return l2_norm_sq(fractional_multiplier(rb, 0.5 * (3 - n)));
}

CnCalibration calibrated_cn(int dim) {
    if (dim == 2) return calibrated_cn_2d;
    if (dim == 3) return calibrated_cn_3d;
    throw std::invalid_argument("c_n is calibrated for n = 2 and 3 only");
}

CnCalibration calibrate_cn(int dim) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("c_n is calibrated for n = 2 and 3 only");
    const double L = 8.0, sigma = 1.0;
    const int sizes[3] = {16, 32, 64};
    double r[3];
    for (int i = 0; i < 3; ++i) {
        BoxGrid g(dim, sizes[i], L, std::size_t(1) << 24);
        Field u(g);
        for (std::size_t p = 0; p < g.size(); ++p) {
            Vec3 x = g.point(p);
            const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            u[p] = cplx(1.0 + 0.3 * x[0] / sigma, 0.2 * x[1] / sigma) * std::exp(-r2 / (2 * sigma * sigma));
        }
        MorawetzOptions opt;
        opt.cap = 16;
        r[i] = im_clean_lhs(u, true, opt) / im_clean_rhs(u);
    }
    const double d1 = r[1] - r[0], d2 = r[2] - r[1];
    if (d2 == 0.0 || d1 == 0.0 || d1 / d2 <= 1.0) return {r[2], std::abs(d2)};
    const double q = d1 / d2; // refinement factor 2^p
    const double extrap = r[2] + d2 / (q - 1.0);
    return {extrap, std::abs(extrap - r[2])};
}

ImClean im_clean(const Field& u, const MorawetzOptions& opt) {
    ImClean out;
    out.lhs = im_clean_lhs(u, true, opt);
    out.rhs = im_clean_rhs(u);
    out.ratio = out.lhs / out.rhs;
    out.c_n = calibrated_cn(u.grid.dim()).value;
    return out;
}

namespace {

void require_pair_stencil(const Trajectory& u, const Trajectory& v) {
    require_same_grid(u.grid, v.grid);
    if (u.size() < 5 || u.size() != v.size()) throw std::invalid_argument("Morawetz residual needs matching runs of at least 5 snapshots");
    if (!u.uniform()) throw std::invalid_argument("Morawetz residual needs uniform snapshot spacing");
    for (std::size_t i = 0; i < u.size(); ++i)
        if (std::abs(u.times[i] - v.times[i]) > 1e-12 * std::max(1.0, std::abs(u.times[i])))
            throw std::invalid_argument("Morawetz residual needs matching snapshot times");
}

template <class Derivative>
std::vector<MorawetzRow> assemble_rows(const Trajectory& u, const std::vector<double>& I, Derivative rhs) {
    const double h = u.sample_spacing();
    std::vector<MorawetzRow> rows;
    for (std::size_t m = 2; m + 2 < u.size(); ++m) {
        double dI = 0.0;
        for (int o = -2; o <= 2; ++o) dI += central_difference_weight(o) * I[m + o];
        dI /= h;
        auto [J, K] = rhs(m);
        rows.push_back({u.times[m], I[m], J, K, dI, dI - J - K});
    }
    return rows;
}

} // namespace

std::vector<MorawetzRow> morawetz_identity_residual(const Trajectory& u, const Trajectory& v, const Vec3& x0,
                                                    const WeightSpec& w, const MorawetzOptions& opt) {
    require_pair_stencil(u, v);
    std::vector<double> I;
    for (std::size_t m = 0; m < u.size(); ++m)
        I.push_back(interaction_functional(u.snapshots[m], v.snapshots[m], x0, w, opt));
    return assemble_rows(u, I, [&](std::size_t m) {
        return std::pair<double, double>{j4(u.snapshots[m], v.snapshots[m], x0, w, opt), 0.0};
    });
}

std::vector<MorawetzRow> morawetz_para_residual(const Trajectory& u, const ParaContext& cu, const Trajectory& v,
                                                const ParaContext& cv, const Vec3& x0, const WeightSpec& w,
                                                const MorawetzOptions& opt) {
    require_pair_stencil(u, v);
    require_cap(u.grid, opt);
    const BoxGrid& g = u.grid;
    const double h = u.sample_spacing();
    std::vector<double> I;
    for (std::size_t m = 0; m < u.size(); ++m) {
        const double t = u.times[m];
        Pack pu = pack(covariant_densities(u.snapshots[m], cu.metric(t), nullptr, nullptr), nullptr);
        Pack pv = pack(covariant_densities(v.snapshots[m], cv.metric(t), nullptr, nullptr), &x0);
        I.push_back(gradient_pairing(g, w, pu.M, pv.P, pu.P, pv.M));
    }
    return assemble_rows(u, I, [&](std::size_t m) {
        const double t = u.times[m];
        MetricField dGu = cu.metric_rate(t, h), dGv = cv.metric_rate(t, h);
        Field fu(g), fv(g);
        if (cu.f) fu = cu.f(t);
        if (cv.f) fv = cv.f(t);
        Pack pu = pack(covariant_densities(u.snapshots[m], cu.metric(t), &dGu, &fu), nullptr);
        Pack pv = pack(covariant_densities(v.snapshots[m], cv.metric(t), &dGv, &fv), &x0);
        const double J = hessian_pairing(g, w, pu, pv);
        const double K = gradient_pairing(g, w, pu.Fm, pv.P, pu.Fp, pv.M) +
                         gradient_pairing(g, w, pu.M, pv.Fp, pu.P, pv.Fm);
        return std::pair<double, double>{J, K};
    });
}

void write_morawetz_csv(const std::string& path, const std::vector<MorawetzRow>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(12);
    os << "time,I,J4,K,dIdt,residual\n";
    for (const auto& r : rows)
        os << r.time << ',' << r.I << ',' << r.J4 << ',' << r.K << ',' << r.dIdt << ',' << r.residual << '\n';
}

} // namespace qnls
