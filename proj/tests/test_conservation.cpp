#include "qnls/conservation.hpp"
#include "qnls/evolution.hpp"
#include "qnls/littlewood_paley.hpp"
#include "qnls/stats.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace qnls;
using qnls::testing::band_limited;
using qnls::testing::rel_diff;

namespace {

Field smooth_data(const BoxGrid& g, int modes, double amp, unsigned seed) {
    Field u = band_limited(g, seed, modes);
    u *= amp / max_abs(u);
    return u;
}

double worst_relative(const Ledger& l) {
    double w = 0.0;
    for (const auto& r : l) w = std::max(w, r.l2 / std::max(r.flux_norm, 1e-300));
    return w;
}

} // namespace

TEST_CASE("densities of simple fields") {
    BoxGrid g(2, 16, 2 * M_PI);
    const cplx A(0.6, -0.8);
    const double xi[2] = {2.0, -3.0};
    Field pw(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        pw[i] = A * std::exp(cplx(0.0, xi[0] * x[0] + xi[1] * x[1]));
    }
    DensitySet d = densities(pw);
    const double a2 = std::norm(A);
    for (std::size_t i = 0; i < g.size(); ++i) {
        REQUIRE(std::abs(d.M[i] - a2) < 1e-12);
        for (int j = 0; j < 2; ++j) {
            REQUIRE(std::abs(d.P[j][i] + 2 * xi[j] * a2) < 1e-12);
            for (int m = 0; m < 2; ++m) REQUIRE(std::abs(d.e(j, m)[i] - 4 * xi[j] * xi[m] * a2) < 1e-11);
        }
    }
    CHECK(d.imag_residue <= 1e-12);

    Field re = real_part(smooth_data(g, 3, 1.0, 4));
    DensitySet dr = densities(re);
    for (int j = 0; j < 2; ++j) CHECK(max_abs(dr.P[j]) < 1e-13);

    DensitySet z = densities(Field(g));
    CHECK(max_abs(z.M) == 0.0);
    CHECK(max_abs(z.e(0, 1)) == 0.0);
}

TEST_CASE("density invariants") {
    BoxGrid g(2, 32, 6.0);
    Field u = smooth_data(g, 5, 1.0, 8);
    DensitySet d = densities(u);
    for (const auto& v : d.M.values) REQUIRE(v.real() >= 0.0);
    CHECK(max_abs(d.e(0, 1) - d.e(1, 0)) <= 1e-12);
    CHECK(integrate_real(d.M) == doctest::Approx(l2_norm_sq(u)).epsilon(1e-12));

    Vec3 x0{0.7, -1.3, 0.0};
    DensitySet dt = densities(translate(u, x0));
    // Products are band-limited to twice the data band, which the grid resolves.
    CHECK(rel_diff(dt.M, translate(d.M, x0)) <= 1e-12);
    CHECK(rel_diff(dt.P[1], translate(d.P[1], x0)) <= 1e-12);
    CHECK(rel_diff(dt.e(0, 1), translate(d.e(0, 1), x0)) <= 1e-12);
}

TEST_CASE("flat density-flux identities and refinement") {
    BoxGrid g(2, 32, 2 * M_PI);
    Field u0 = smooth_data(g, 4, 1.0, 3);
    std::vector<double> dts{1e-3, 5e-4, 2.5e-4}, rm, rp;
    for (double dt : dts) {
        Ledger l = flat_flux_residual(solve_flat(u0, 4 * dt, dt));
        rm.push_back(max_l2(l, "mass"));
        rp.push_back(max_l2(l, "momentum"));
    }
    CHECK(rm[0] <= 1e-7);
    CHECK(rp[0] <= 1e-6);
    CHECK(loglog_fit(dts, rm).slope == doctest::Approx(4.0).epsilon(0.3 / 4));
    CHECK(loglog_fit(dts, rp).slope == doctest::Approx(4.0).epsilon(0.3 / 4));

    Field pw(g);
    for (std::size_t i = 0; i < g.size(); ++i) pw[i] = std::exp(cplx(0.0, 3.0 * g.point(i)[1]));
    Ledger lp = flat_flux_residual(solve_flat(pw, 1.0, 0.1));
    CHECK(max_l2(lp, "mass") <= 1e-12);
    CHECK(max_l2(lp, "momentum") <= 1e-12 * l2_norm(densities(pw).e(1, 1)));

    Trajectory tr = solve_flat(u0, 1.0, 0.1);
    double p0 = integrate_real(densities(u0).P[0]);
    for (const auto& f : tr.snapshots) CHECK(std::abs(integrate_real(densities(f).P[0]) - p0) <= 1e-10);

    CHECK_THROWS_AS(flat_flux_residual(solve_flat(u0, 0.003, 0.001)), std::invalid_argument);
}

TEST_CASE("weighted densities") {
    BoxGrid g(2, 32, 2 * M_PI);
    Field u = smooth_data(g, 4, 1.0, 12);
    DensitySet plain = densities(u);
    DensitySet one = weighted_densities(u, BilinearSymbol::unit());
    CHECK(rel_diff(one.M, plain.M) < 1e-13);
    CHECK(rel_diff(one.P[0], plain.P[0]) < 1e-13);
    CHECK(rel_diff(one.e(1, 0), plain.e(1, 0)) < 1e-13);

    const int k = 2;
    DyadicFilterBank bank(g);
    DensitySet sh = weighted_densities(u, BilinearSymbol::shell(g, k));
    Field pk = bank.project(u, k);
    Field want(g);
    for (std::size_t i = 0; i < g.size(); ++i) want[i] = std::norm(pk[i]);
    CHECK(rel_diff(sh.M, want) < 1e-13);
    Ledger l = weighted_flux_residual(solve_flat(u, 0.004, 0.001), BilinearSymbol::shell(g, k));
    CHECK(max_l2(l, "") <= 1e-7);

    BilinearSymbol skew;
    skew.terms.push_back({[](const Vec3& xi) { return cplx(1.0 + xi[0]); }, SlotFactor{}});
    CHECK_THROWS_AS(weighted_densities(u, skew), std::invalid_argument);
    CHECK_THROWS_AS(BilinearSymbol::shell(g, 0), std::out_of_range);
}

TEST_CASE("paradifferential identities") {
    BoxGrid g(2, 128, 2 * M_PI);
    ModelSpec m = ModelSpec::quasilinear_iso(2, 1.0, 0.0);
    Field u0 = smooth_data(g, 2, 0.3, 5);
    SolverOptions opt;
    opt.T = 0.05;
    opt.dt = 0.0005;
    opt.skip_checks = true;
    Trajectory bg = solve_qnls(m, u0, opt);
    Field v0 = smooth_data(g, 12, 1.0, 7);
    // Forcing localized to the solution shell, as the flow's re-projection assumes.
    DyadicFilterBank bank(g);
    Field fshape = smooth_data(g, 10, 0.5, 9);
    Field f3 = bank.project(fshape, 3), f4 = bank.project(fshape, 4);
    Forcing f = [&](double t) { return cplx(0.3 * std::cos(t)) * f3; };
    opt.T = 0.02;
    Trajectory v = solve_paradifferential(m, bg, v0, f, 3, opt);
    ParaContext ctx{&m, &bg, 3, f};
    Ledger l = para_flux_residual(v, ctx);
    CHECK(worst_relative(l) < 1e-6);

    // Small background on the λ = 16 shell. The mass residual is the time-stencil
    // error, so it must drop 16x under dt halving.
    std::vector<double> mass;
    for (double dt : {5e-4, 2.5e-4}) {
        opt.dt = dt;
        opt.T = 0.05;
        Trajectory small = solve_qnls(m, smooth_data(g, 2, 0.05, 5), opt);
        opt.T = 16 * dt;
        Forcing g4 = [&](double t) { return cplx(0.3 * std::cos(t)) * f4; };
        Trajectory vs = solve_paradifferential(m, small, v0, g4, 4, opt);
        Ledger ls = para_flux_residual(vs, ParaContext{&m, &small, 4, g4});
        mass.push_back(max_l2(ls, "mass"));
        CHECK(worst_relative(ls) < 1e-6);
    }
    CHECK(mass[1] <= 1e-6);
    CHECK(std::log2(mass[0] / mass[1]) >= 3.7);

    // Zero background reduces to the flat identities.
    Trajectory zero = solve_flat(Field(g), 0.05, 0.0005);
    Trajectory v2 = solve_paradifferential(m, zero, v0, {}, 3, opt);
    ParaContext z{&m, &zero, 3, {}};
    Ledger lz = para_flux_residual(v2, z);
    Ledger lf = flat_flux_residual(v2);
    CHECK(max_l2(lz, "mass") == doctest::Approx(max_l2(lf, "mass")).epsilon(1e-6));
}
