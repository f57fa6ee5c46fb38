#include "qnls/evolution.hpp"
#include "qnls/littlewood_paley.hpp"
#include "qnls/norms.hpp"

#include <doctest.h>

#include <cmath>
#include <iostream>
#include <random>

using namespace qnls;

namespace {

Field shell_data(const BoxGrid& g, unsigned seed, int modes = 6) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    SpectralRep F(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        bool keep = true;
        for (int j = 0; j < g.dim(); ++j) keep = keep && std::abs(g.mode_index(idx[j])) <= modes;
        if (keep) F.coeffs[i] = cplx(nd(rng), nd(rng));
    }
    return to_physical(F);
}

} // namespace

TEST_CASE("admissibility follows 2/p + n/q = n/2") {
    CHECK(strichartz_admissible(2, 4, 4));
    CHECK(strichartz_admissible(2, infinite_exponent, 2));
    CHECK_FALSE(strichartz_admissible(2, 2, infinite_exponent));
    CHECK(strichartz_admissible(3, 2, 6));
    CHECK(strichartz_admissible(1, 4, infinite_exponent));
    CHECK_FALSE(strichartz_admissible(2, 3, 3));
}

TEST_CASE("Strichartz meter on plane waves and flat flow") {
    BoxGrid g(2, 16, 2 * M_PI);
    Field pw(g);
    const cplx A(0.7, -0.2);
    for (std::size_t i = 0; i < g.size(); ++i) pw[i] = A * std::exp(cplx(0.0, 2.0 * g.point(i)[0]));
    Trajectory tr = solve_flat(pw, 0.5, 0.05);
    const double T = 0.5, vol = g.volume();
    auto v = strichartz_norm(tr, 4, 4);
    CHECK(v.value == doctest::Approx(std::abs(A) * std::pow(vol, 0.25) * std::pow(T, 0.25)).epsilon(1e-12));
    CHECK(v.value_double_stride == doctest::Approx(v.value).epsilon(1e-12));
    CHECK_THROWS_AS(strichartz_norm(tr, 3, 3), std::invalid_argument);
    CHECK_NOTHROW(strichartz_norm(tr, 3, 3, true));

    Field u = shell_data(g, 3);
    Trajectory fl = solve_flat(u, 0.3, 0.01);
    CHECK(strichartz_norm(fl, infinite_exponent, 2).value == doctest::Approx(l2_norm(u)).epsilon(1e-12));

    // Brute-force quadrature over the full space-time array.
    BoxGrid tiny(2, 8, 2 * M_PI);
    Trajectory t2 = solve_flat(shell_data(tiny, 4, 2), 0.2, 0.05);
    double acc = 0.0;
    for (std::size_t k = 0; k < t2.size(); ++k) {
        double s = 0.0;
        for (const auto& z : t2.snapshots[k].values) s += std::pow(std::abs(z), 4);
        const double w = (k == 0 || k + 1 == t2.size()) ? 0.5 : 1.0;
        acc += w * 0.05 * s * tiny.cell_volume();
    }
    CHECK(strichartz_norm(t2, 4, 4).value == doctest::Approx(std::pow(acc, 0.25)).epsilon(1e-12));

    auto c = strichartz_norm(solve_flat(2.5 * u, 0.3, 0.01), 4, 4);
    CHECK(c.value == doctest::Approx(2.5 * strichartz_norm(fl, 4, 4).value).epsilon(1e-12));
}

TEST_CASE("bilinear meter") {
    BoxGrid g(2, 32, 2 * M_PI);
    Field u = shell_data(g, 7, 10);
    Trajectory tr = solve_flat(u, 0.1, 0.01);
    DyadicFilterBank bank(g);
    const int k = 3;
    Trajectory proj(g);
    for (std::size_t i = 0; i < tr.size(); ++i) proj.append(tr.times[i], dealias(bank.project(tr.snapshots[i], k)));
    const double b = bilinear_l2(tr, k, tr, k, {0, 0, 0});
    const double l4 = strichartz_norm(proj, 4, 4).value;
    CHECK(std::abs(b - l4 * l4) <= 1e-10 * b);

    Trajectory zero = solve_flat(Field(g), 0.1, 0.01);
    CHECK(bilinear_l2(tr, 2, zero, 4, {0, 0, 0}) == 0.0);

    const Vec3 x0{0.4, -0.9, 0};
    Trajectory shifted(g);
    for (std::size_t i = 0; i < tr.size(); ++i) shifted.append(tr.times[i], translate(tr.snapshots[i], x0));
    CHECK(bilinear_l2(tr, 2, tr, 3, x0) == doctest::Approx(bilinear_l2(tr, 2, shifted, 3, {0, 0, 0})).epsilon(1e-12));

    Trajectory doubled = solve_flat(3.0 * u, 0.1, 0.01);
    CHECK(bilinear_l2(doubled, 2, tr, 3, {0, 0, 0}, 0.5) ==
          doctest::Approx(3.0 * bilinear_l2(tr, 2, tr, 3, {0, 0, 0}, 0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(bilinear_l2(tr, 2, tr, 3, {0, 0, 0}, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(bilinear_l2(tr, 99, tr, 3, {0, 0, 0}), std::out_of_range);
}

TEST_CASE("d_lambda examples") {
    BoxGrid g(2, 16, 2 * M_PI);
    Field v0 = shell_data(g, 9, 3);
    const double T = 0.2;
    Trajectory v = solve_flat(v0, T, 0.02);
    Trajectory zero = solve_flat(Field(g), T, 0.02);
    CHECK(d_lambda_family({v}, {zero}) == doctest::Approx(l2_norm(v0)).epsilon(1e-12));
    const double d = d_lambda_family({v}, {v});
    CHECK(d * d == doctest::Approx((1.0 + T) * l2_norm_sq(v0)).epsilon(1e-10));
    Trajectory v2 = solve_flat(2.0 * v0, T, 0.02);
    const double d2 = d_lambda_family({v}, {v2});
    CHECK(d2 * d2 - l2_norm_sq(v0) == doctest::Approx(2.0 * (d * d - l2_norm_sq(v0))).epsilon(1e-10));
    CHECK_THROWS_AS(d_lambda_family({}, {v}), std::invalid_argument);
}

TEST_CASE("scattering extraction on flat flow") {
    BoxGrid g(2, 16, 2 * M_PI);
    Field u0 = shell_data(g, 2, 4);
    Trajectory tr = solve_flat(u0, 4.0, 0.5);
    auto p = scattering_extract(tr, {1.0, 2.0, 3.0, 4.0});
    for (double inc : p.increments) CHECK(inc <= 1e-14 * sobolev_norm(u0, 1.0));
    CHECK_THROWS_AS(scattering_extract(tr, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("transversality exponents in two dimensions") {
    TransversalityConfig c;
    c.lambda2_values = {8, 16, 32};
    c.lambda2_fixed = 32;
    auto f = transversality_scaling_fit(c);
    CHECK(std::abs(f.lambda2_fit.slope + 0.5) <= 0.15);
    CHECK(std::abs(f.lambda1_fit.slope - 0.5) <= 0.15);
    c.seed = 11;
    auto f2 = transversality_scaling_fit(c);
    CHECK(std::abs(f2.lambda2_fit.slope - f.lambda2_fit.slope) <= f.lambda2_fit.slope_halfwidth + f2.lambda2_fit.slope_halfwidth + 0.02);
    CHECK(f2.to_json().dump() == transversality_scaling_fit(c).to_json().dump());
    TransversalityConfig bad;
    bad.lambda1_values = {2, 4};
    CHECK_THROWS_AS(transversality_scaling_fit(bad), std::invalid_argument);
}
