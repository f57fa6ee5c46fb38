#include "qnls/evolution.hpp"
#include "qnls/littlewood_paley.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace qnls;
using qnls::testing::band_limited;
using qnls::testing::rel_diff;
using qnls::testing::white;

TEST_CASE("profile and partition of unity") {
    CHECK(lp_profile(0.0) == 1.0);
    CHECK(lp_profile(-1.0) == 1.0);
    CHECK(lp_profile(2.0) == 0.0);
    CHECK(lp_profile(1.5) == doctest::Approx(0.5));
    for (double r = 1.0; r < 2.0; r += 0.01) CHECK(lp_profile(r) >= lp_profile(r + 0.01));

    BoxGrid g(2, 64, 2 * M_PI);
    DyadicFilterBank bank(g);
    CHECK(bank.shells() == static_cast<int>(std::ceil(std::log2(g.xi_max()))));
    for (std::size_t i = 0; i < g.size(); ++i) {
        double r = std::sqrt(g.wavenumber_sq(i)), s = 0.0;
        for (int k = 1; k <= bank.shells(); ++k) s += bank.shell_weight(k, r);
        REQUIRE(std::abs(s - 1.0) < 1e-15);
    }
    CHECK_THROWS_AS(bank.project(white(g, 1), 0), std::out_of_range);
    CHECK_THROWS_AS(bank.project(white(g, 1), bank.shells() + 1), std::out_of_range);
}

TEST_CASE("reconstruction and disjoint shells on random fields") {
    for (int dim = 1; dim <= 3; ++dim) {
        BoxGrid g(dim, dim == 3 ? 16 : 32, 7.0);
        DyadicFilterBank bank(g);
        for (unsigned s = 0; s < 100; ++s) {
            Field f = white(g, s);
            Field sum(g);
            for (int k = 1; k <= bank.shells(); ++k) sum += bank.project(f, k);
            REQUIRE(rel_diff(sum, f) <= 1e-12);
        }
        Field f = white(g, 500);
        for (int k = 1; k <= bank.shells(); ++k)
            for (int j = k + 2; j <= bank.shells(); ++j)
                CHECK(l2_norm(bank.project(bank.project(f, k), j)) <= 1e-12 * l2_norm(f));
    }
}

TEST_CASE("idempotence defect equals the symbol defect") {
    BoxGrid g(2, 32, 9.0);
    DyadicFilterBank bank(g);
    Field f = white(g, 3);
    SpectralRep F = to_spectral(f);
    for (int k = 1; k <= bank.shells(); ++k) {
        double exact = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double p = bank.shell_weight(k, std::sqrt(g.wavenumber_sq(i)));
            exact += std::norm((p - p * p) * F.coeffs[i]);
        }
        exact = std::sqrt(exact * g.volume());
        Field pk = bank.project(f, k);
        CHECK(l2_norm(bank.project(pk, k) - pk) == doctest::Approx(exact).epsilon(1e-10).scale(1e-14));
    }
}

TEST_CASE("low-pass and pure-tone splitting") {
    BoxGrid g(2, 32, 2 * M_PI);
    DyadicFilterBank bank(g);
    Field low = band_limited(g, 9, 2); // |ξ| ≤ 2√2 < 4
    CHECK(rel_diff(bank.project_leq(low, 2), low) < 1e-14);
    CHECK(rel_diff(bank.project_gt(low, 2) + bank.project_leq(low, 2), low) < 1e-14);

    BoxGrid g1(1, 32, 2 * M_PI);
    DyadicFilterBank b1(g1);
    Field tone(g1);
    for (std::size_t i = 0; i < g1.size(); ++i) tone[i] = std::exp(cplx(0.0, 6.0 * g1.point(i)[0]));
    const int k = 2; // |ξ₀| = 3·2^{k−1}
    double wk = l2_norm(b1.project(tone, k)) / l2_norm(tone);
    double wk1 = l2_norm(b1.project(tone, k + 1)) / l2_norm(tone);
    CHECK(wk == doctest::Approx(lp_profile(1.5)).epsilon(1e-12));
    CHECK(wk + wk1 == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = 1; j <= b1.shells(); ++j)
        if (j != k && j != k + 1) CHECK(l2_norm(b1.project(tone, j)) < 1e-13);
}

TEST_CASE("minimal envelope") {
    BoxGrid g(1, 64, 2 * M_PI);
    DyadicFilterBank bank(g);
    const int k0 = 3;
    Field tone(g);
    for (std::size_t i = 0; i < g.size(); ++i) tone[i] = 0.7 * std::exp(cplx(0.0, 8.0 * g.point(i)[0]));
    auto a = bank.shell_norms(tone, 0.0);
    for (int k = 1; k <= bank.shells(); ++k)
        if (k != k0) CHECK(a[k - 1] < 1e-12);
    Envelope e = minimal_envelope(tone, 0.0, 0.2);
    for (int k = 1; k <= bank.shells(); ++k)
        CHECK(e.at(k) == doctest::Approx(a[k0 - 1] * std::exp2(-0.2 * std::abs(k - k0))).epsilon(1e-12));

    Envelope z = minimal_envelope(Field(g), 1.0);
    for (double c : z.c) CHECK(c == 0.0);
    CHECK_THROWS_AS(minimal_envelope(tone, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(minimal_envelope(tone, 0.0, 0.6), std::invalid_argument);

    // A field with equal shell norms is its own envelope.
    Field flat(g);
    for (int k = 1; k <= bank.shells(); ++k) {
        Field t(g);
        double freq = k == 1 ? 0.0 : std::ldexp(1.0, k);
        if (freq >= 32) break;
        for (std::size_t i = 0; i < g.size(); ++i) t[i] = std::exp(cplx(0.0, freq * g.point(i)[0]));
        t *= 1.0 / l2_norm(t);
        flat += t;
    }
    auto fa = bank.shell_norms(flat, 0.0);
    Envelope fe = minimal_envelope(flat, 0.0);
    for (int k = 1; k <= bank.shells(); ++k)
        if (fa[k - 1] > 0.999) CHECK(fe.at(k) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("minimal envelope is a valid envelope") {
    BoxGrid g(2, 64, 10.0);
    DyadicFilterBank bank(g);
    for (unsigned s = 0; s < 20; ++s) {
        Field f = band_limited(g, s, 20);
        for (double sreg : {0.0, 1.0}) {
            Envelope e = minimal_envelope(f, sreg, 0.1);
            CHECK(e.slowly_varying());
            CHECK(envelope_dominates(e, f));
            // Σc² ≤ C(δ)‖f‖², C(δ) = Σ_j 2^{−2δ|j|}
            double Cd = 0.0;
            for (int j = -bank.shells(); j <= bank.shells(); ++j) Cd += std::exp2(-0.2 * std::abs(j));
            CHECK(e.l2_sum() <= Cd * std::pow(sobolev_norm(f, sreg), 2) * (1 + 1e-12));
        }
    }
}

TEST_CASE("envelope report under the flat flow") {
    BoxGrid g(2, 32, 8.0);
    DyadicFilterBank bank(g);
    Field u0 = band_limited(g, 4, 10);
    Envelope e;
    e.c = bank.shell_norms(u0, 1.0);
    e.s = 1.0;
    Trajectory tr = solve_flat(u0, 1.0, 0.1);
    auto rows = envelope_report(tr, e, 1.0);
    const double floor = 1e-8 * sobolev_norm(u0, 1.0); // empty shells hold roundoff only
    for (const auto& r : rows)
        if (e.at(r.k) > floor) CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-12));

    Trajectory scaled = solve_flat(0.1 * u0, 1.0, 0.1);
    Envelope es = e;
    for (auto& c : es.c) c *= 0.1;
    auto rows2 = envelope_report(scaled, es, 1.0);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (e.at(rows[i].k) > floor) CHECK(rows2[i].ratio == doctest::Approx(rows[i].ratio).epsilon(1e-12));
    for (const auto& r : rows)
        if (e.at(r.k) > floor) CHECK_FALSE(r.flagged);
}
