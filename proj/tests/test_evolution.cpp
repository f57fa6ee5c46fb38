#include "qnls/evolution.hpp"
#include "qnls/littlewood_paley.hpp"
#include "qnls/stats.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace qnls;
using qnls::testing::band_limited;
using qnls::testing::rel_diff;

namespace {

Field small_data(const BoxGrid& g, unsigned seed, int modes, double eps) {
    Field f = band_limited(g, seed, modes);
    f *= eps / sobolev_norm(f, 1.0);
    return f;
}

Field shell_packet(const BoxGrid& g, int k, unsigned seed) {
    DyadicFilterBank bank(g);
    Field f = bank.project(band_limited(g, seed, g.n() / 3), k);
    f *= 1.0 / l2_norm(f);
    return f;
}

} // namespace

TEST_CASE("flat solver") {
    BoxGrid g(1, 32, 2 * M_PI);
    Field pw(g);
    for (std::size_t i = 0; i < g.size(); ++i) pw[i] = std::exp(cplx(0.0, 3.0 * g.point(i)[0]));
    Trajectory tr = solve_flat(pw, 1.0, 0.25);
    REQUIRE(tr.size() == 5);
    for (std::size_t m = 0; m < tr.size(); ++m)
        CHECK(rel_diff(tr.snapshots[m], std::exp(cplx(0.0, -9.0 * tr.times[m])) * pw) < 1e-12);

    // Two-mode beat: |u|² = 2 + 2cos((a−b)x − (a²−b²)t).
    Field two(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.point(i)[0];
        two[i] = std::exp(cplx(0.0, 2.0 * x)) + std::exp(cplx(0.0, -5.0 * x));
    }
    Trajectory bt = solve_flat(two, 0.7, 0.1);
    double err = 0.0;
    for (std::size_t m = 0; m < bt.size(); ++m)
        for (std::size_t i = 0; i < g.size(); ++i) {
            double x = g.point(i)[0], t = bt.times[m];
            err = std::max(err, std::abs(std::norm(bt.snapshots[m][i]) - (2 + 2 * std::cos(7 * x + 21 * t))));
        }
    CHECK(err < 1e-12);

    BoxGrid g2(2, 16, 5.0);
    Field u = qnls::testing::white(g2, 3);
    Trajectory ut = solve_flat(u, 2.0, 0.5);
    for (const auto& f : ut.snapshots) CHECK(std::abs(l2_norm(f) / l2_norm(u) - 1.0) < 1e-12);
    CHECK_THROWS_AS(solve_flat(u, 1.0, 0.3), std::invalid_argument);
}

TEST_CASE("full solver reduces to the flat flow and conserves mass") {
    BoxGrid g(2, 32, 2 * M_PI);
    Field u0 = small_data(g, 1, 4, 0.3);
    ModelSpec lin;
    lin.dim = 2;
    SolverOptions o;
    o.T = 1.0;
    o.dt = 0.01;
    o.stride = 25;
    Trajectory a = solve_qnls(lin, u0, o);
    Trajectory b = solve_flat(u0, 1.0, 0.25);
    REQUIRE(a.size() == b.size());
    for (std::size_t m = 0; m < a.size(); ++m) CHECK(rel_diff(a.snapshots[m], b.snapshots[m]) < 1e-10);

    ModelSpec s = ModelSpec::semilinear_cubic(2);
    o.T = 2.0;
    o.dt = 1e-3;
    o.stride = 500;
    Trajectory c = solve_qnls(s, small_data(g, 2, 6, 0.1), o);
    double m0 = l2_norm(c.snapshots.front()), drift = 0.0;
    for (const auto& f : c.snapshots) drift = std::max(drift, std::abs(l2_norm(f) - m0) / m0);
    CHECK(drift <= 1e-8);
    CHECK((c.alias_flags > 0) == (c.max_alias_fraction > o.alias_tol));
}

TEST_CASE("fourth-order self-convergence and time reversal") {
    BoxGrid g(2, 32, 2 * M_PI);
    ModelSpec m = ModelSpec::quasilinear_iso(2, 1.0);
    Field u0 = small_data(g, 1, 3, 0.5);
    SolverOptions o;
    o.T = 0.5;
    std::vector<double> dts{0.02, 0.01, 0.005}, errs;
    for (double dt : dts) {
        o.dt = dt;
        Field coarse = solve_qnls(m, u0, o).snapshots.back();
        o.dt = dt / 2;
        Field fine = solve_qnls(m, u0, o).snapshots.back();
        errs.push_back(l2_norm(coarse - fine));
    }
    CHECK(loglog_fit(dts, errs).slope == doctest::Approx(4.0).epsilon(0.3 / 4.0));

    o.dt = 0.01;
    Field fwd = solve_qnls(m, u0, o).snapshots.back();
    SolverOptions back = o;
    back.T = -0.5;
    Field ret = solve_qnls(m, fwd, back).snapshots.back();
    CHECK(l2_norm(ret - u0) <= 10.0 * errs[1]);

    o.divergence_form = false;
    Field nd = solve_qnls(m, u0, o).snapshots.back();
    CHECK(l2_norm(nd - fwd) > 0.0);
    CHECK(l2_norm(nd - fwd) < 1e-2 * l2_norm(u0));
}

TEST_CASE("solver guards") {
    BoxGrid g(2, 16, 2 * M_PI);
    SolverOptions o;
    o.T = 0.1;
    o.dt = 0.01;
    ModelSpec bad = ModelSpec::semilinear_cubic(2);
    bad.metric = Metric::linear_re(1.0);
    CHECK_THROWS_AS(solve_qnls(bad, small_data(g, 1, 2, 0.1), o), std::invalid_argument);
    o.eps_max = 0.5;
    CHECK_THROWS_AS(solve_qnls(ModelSpec::semilinear_cubic(2), small_data(g, 1, 2, 1.0), o),
                    std::invalid_argument);

    SolverOptions wild;
    wild.T = 5.0;
    wild.dt = 0.1;
    wild.skip_checks = true;
    Field big = small_data(g, 4, 3, 50.0);
    try {
        solve_qnls(ModelSpec::semilinear_cubic(2, 100.0), big, wild);
        FAIL("expected a numerical abort");
    } catch (const NumericalAbort& e) {
        REQUIRE(e.partial());
        CHECK(e.partial()->size() >= 1);
        CHECK(std::string(e.what()).find("blow-up") != std::string::npos);
    }
}

TEST_CASE("paradifferential flow") {
    BoxGrid g(2, 64, 2 * M_PI);
    const int k = 3;
    ModelSpec m = ModelSpec::quasilinear_iso(2, 1.0);
    SolverOptions o;
    o.T = 1.0;
    o.dt = 0.005;
    o.stride = 50;
    Field v0 = shell_packet(g, k, 9);

    Trajectory zero = solve_flat(Field(g), 1.0, 0.005);
    Trajectory p0 = solve_paradifferential(m, zero, v0, {}, k, o);
    Trajectory fl = solve_flat(p0.snapshots.front(), 1.0, 0.25);
    for (std::size_t i = 0; i < p0.size(); ++i) CHECK(rel_diff(p0.snapshots[i], fl.snapshots[i]) < 1e-10);

    SolverOptions bo;
    bo.T = 1.0;
    bo.dt = 0.005;
    Trajectory bg = solve_qnls(m, small_data(g, 2, 2, 0.3), bo);
    Trajectory pv = solve_paradifferential(m, bg, v0, {}, k, o);
    const double n0 = l2_norm(pv.snapshots.front());
    double drift = 0.0;
    for (const auto& f : pv.snapshots) drift = std::max(drift, std::abs(l2_norm(f) - n0) / n0);
    CHECK(drift <= 1e-6);
    CHECK(pv.meta["leaked_mass"].get<double>() / o.T <= 1e-8);
}

TEST_CASE("linearized flow") {
    BoxGrid g(2, 32, 2 * M_PI);
    ModelSpec m = ModelSpec::quasilinear_iso(2, 1.0);
    SolverOptions o;
    o.T = 1.0;
    o.dt = 0.01;
    Field v0 = small_data(g, 5, 3, 0.3);

    Trajectory zero = solve_flat(Field(g), 1.0, 0.01);
    Trajectory l0 = solve_linearized(m, zero, v0, o);
    CHECK(rel_diff(l0.snapshots.back(), solve_flat(v0, 1.0, 1.0).snapshots.back()) < 1e-10);

    Field u0 = small_data(g, 1, 3, 0.5);
    Trajectory bg = solve_qnls(m, u0, o);
    Trajectory lin = solve_linearized(m, bg, v0, o);
    std::vector<double> hs{0.1, 0.05, 0.025}, fe;
    for (double h : hs) {
        Field up = u0 + cplx(h) * v0;
        Field fd = cplx(1.0 / h) * (solve_qnls(m, up, o).snapshots.back() - bg.snapshots.back());
        fe.push_back(l2_norm(fd - lin.snapshots.back()));
    }
    CHECK(loglog_fit(hs, fe).slope >= 0.9);

    o.T = 5.0;
    o.stride = 50;
    Trajectory bg5 = solve_qnls(m, small_data(g, 1, 3, 0.1), SolverOptions{5.0, 0.01});
    Trajectory l5 = solve_linearized(m, bg5, v0, o);
    for (const auto& f : l5.snapshots) {
        CHECK(l2_norm(f) <= 2.0 * l2_norm(v0));
        CHECK(l2_norm(f) >= 0.5 * l2_norm(v0));
    }
}

TEST_CASE("trajectory storage and interpolation") {
    BoxGrid g(2, 16, 4.0);
    Field u0 = band_limited(g, 2, 3);
    Trajectory tr = solve_flat(u0, 0.1, 0.01);
    CHECK(tr.uniform());
    CHECK(tr.sample_spacing() == doctest::Approx(0.01));
    CHECK(rel_diff(tr.at(0.03), tr.snapshots[3]) < 1e-14);
    // Cubic interpolation of a smooth flow between samples.
    CHECK(rel_diff(tr.at(0.035), flat_propagator(u0, 0.035)) < 1e-2);

    auto dir = std::filesystem::temp_directory_path() / "qnls_traj_test";
    std::filesystem::remove_all(dir);
    auto files = tr.save(dir.string());
    CHECK(files.size() == tr.size() + 1);
    Trajectory back = Trajectory::load(dir.string());
    REQUIRE(back.size() == tr.size());
    for (std::size_t m = 0; m < tr.size(); ++m) {
        CHECK(back.times[m] == tr.times[m]);
        CHECK(max_abs(back.snapshots[m] - tr.snapshots[m]) == 0.0);
    }
    std::filesystem::remove_all(dir);
}
