#include "qnls/spectral.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

using namespace qnls;
using qnls::testing::band_limited;
using qnls::testing::rel_diff;
using qnls::testing::white;

namespace {

Field plane_wave(const BoxGrid& g, const std::array<int, 3>& m, cplx A = 1.0) {
    Field f(g);
    const double k0 = g.k0();
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        double ph = 0.0;
        for (int j = 0; j < g.dim(); ++j) ph += k0 * m[j] * x[j];
        f[i] = A * std::exp(cplx(0.0, ph));
    }
    return f;
}

} // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(BoxGrid(4, 16, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(BoxGrid(2, 12, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(BoxGrid(2, 4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(BoxGrid(2, 16, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BoxGrid(3, 256, 1.0), std::invalid_argument);
    BoxGrid g(2, 16, 4.0);
    CHECK(g.size() == 256);
    CHECK(g.axis_wavenumber(8) == 0.0);
    for (int i = 1; i < 8; ++i) CHECK(g.axis_wavenumber(i) == -g.axis_wavenumber(16 - i));
    CHECK_THROWS_AS(Field(BoxGrid(2, 8, 1.0)) + Field(BoxGrid(2, 16, 1.0)), GridMismatch);
}

TEST_CASE("transform of constants and plane waves") {
    BoxGrid g(2, 16, 2 * M_PI);
    Field one(g);
    for (auto& z : one.values) z = 1.0;
    SpectralRep F = to_spectral(one);
    CHECK(std::abs(F.coeffs[0] - 1.0) < 1e-14);
    double rest = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) rest += std::abs(F.coeffs[i]);
    CHECK(rest < 1e-13);

    Field pw = plane_wave(g, {3, -2, 0});
    SpectralRep P = to_spectral(pw);
    std::size_t at = g.flatten({3, 16 - 2, 0});
    CHECK(std::abs(std::abs(P.coeffs[at]) - 1.0) < 1e-13);
    double other = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (i != at) other += std::abs(P.coeffs[i]);
    CHECK(other < 1e-12);
    CHECK_THROWS_AS(to_physical(SpectralRep(BoxGrid(2, 8, 1.0))) + pw, GridMismatch);
}

TEST_CASE("round trip and Plancherel on random fields") {
    for (int dim = 1; dim <= 3; ++dim) {
        BoxGrid g(dim, dim == 3 ? 16 : 32, 5.0);
        for (unsigned s = 0; s < 100; ++s) {
            Field f = white(g, s);
            SpectralRep F = to_spectral(f);
            REQUIRE(rel_diff(to_physical(F), f) <= 1e-12);
            REQUIRE(std::abs(spectral_l2_norm_sq(F) / l2_norm_sq(f) - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("differentiation") {
    BoxGrid g(2, 32, 3.0);
    Field pw = plane_wave(g, {2, 5, 0});
    for (int j = 0; j < 2; ++j) {
        Field d = differentiate(pw, j);
        double xi = g.k0() * (j == 0 ? 2 : 5);
        CHECK(rel_diff(d, cplx(0.0, xi) * pw) < 1e-12);
    }
    Field c(g);
    for (auto& z : c.values) z = 2.5;
    CHECK(max_abs(differentiate(c, 1)) < 1e-13);

    Field s(g), cs(g);
    const double k = 2 * M_PI / g.length();
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.point(i)[0];
        s[i] = std::sin(k * x);
        cs[i] = k * std::cos(k * x);
    }
    CHECK(max_abs(differentiate(s, 0) - cs) < 1e-12);
    CHECK_THROWS_AS(differentiate(s, 2), std::invalid_argument);
}

TEST_CASE("fractional multiplier") {
    BoxGrid g(2, 32, 8.0);
    Field pw = plane_wave(g, {3, 1, 0});
    double xi2 = g.k0() * g.k0() * 10.0;
    CHECK(rel_diff(fractional_multiplier(pw, 2.0), xi2 * pw) < 1e-12);
    CHECK(rel_diff(fractional_multiplier(pw, 0.0), pw) < 1e-14);

    Field bump(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        bump[i] = std::exp(-(x[0] * x[0] + x[1] * x[1]) / 1.2) * cplx(1.0, 0.3 * x[0]);
    }
    Field half = fractional_multiplier(bump, 0.5);
    Field quarter2 = fractional_multiplier(fractional_multiplier(bump, 0.25), 0.25);
    CHECK(rel_diff(quarter2, half) < 1e-10);
    CHECK_THROWS_AS(fractional_multiplier(bump, -2.0), std::invalid_argument);
    CHECK_NOTHROW(fractional_multiplier(bump, -1.5));
}

TEST_CASE("flat propagator") {
    BoxGrid g(2, 32, 6.0);
    Field pw = plane_wave(g, {2, -1, 0}, cplx(0.5, 0.5));
    CHECK(rel_diff(flat_propagator(pw, 0.0), pw) < 1e-14);
    const double t = 0.37, xi2 = g.k0() * g.k0() * 5.0;
    CHECK(rel_diff(flat_propagator(pw, t), std::exp(cplx(0.0, -t * xi2)) * pw) < 1e-12);
    for (unsigned s = 0; s < 100; ++s) {
        Field f = white(g, 100 + s);
        REQUIRE(std::abs(l2_norm(flat_propagator(f, 1.7)) / l2_norm(f) - 1.0) < 1e-12);
        REQUIRE(rel_diff(flat_propagator(flat_propagator(f, 0.3), 1.1), flat_propagator(f, 1.4)) < 1e-12);
    }
}

TEST_CASE("translation") {
    BoxGrid g(2, 16, 4.0);
    Field f = band_limited(g, 7, 7);
    CHECK(rel_diff(translate(f, {0, 0, 0}), f) < 1e-14);
    Vec3 x0{0.3, -1.1, 0};
    CHECK(rel_diff(translate(translate(f, x0), {-0.3, 1.1, 0}), f) < 1e-12);

    // Lattice shift by (3, -2) cells is an index rotation (bump is Nyquist-free).
    Field bump = band_limited(g, 8, 7);
    Field moved = translate(bump, {3 * g.spacing(), -2 * g.spacing(), 0});
    Field rotated(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        rotated[g.flatten({(idx[0] + 3) % 16, (idx[1] + 14) % 16, 0})] = bump[i];
    }
    CHECK(max_abs(moved - rotated) < 1e-12);
}

TEST_CASE("Fourier multipliers commute") {
    BoxGrid g(3, 16, 5.0);
    for (unsigned s = 0; s < 5; ++s) {
        Field f = band_limited(g, 30 + s, 5);
        Field a = differentiate(flat_propagator(f, 0.7), 2);
        Field b = flat_propagator(differentiate(f, 2), 0.7);
        CHECK(rel_diff(a, b) < 1e-12);
        Vec3 x0{0.4, 0.1, -0.9};
        CHECK(rel_diff(differentiate(translate(f, x0), 1), translate(differentiate(f, 1), x0)) < 1e-12);
    }
}

TEST_CASE("dealiasing and central mass") {
    BoxGrid g(1, 32, 2 * M_PI);
    Field low = plane_wave(g, {10, 0, 0});
    Field high = plane_wave(g, {11, 0, 0});
    CHECK(rel_diff(dealias(low), low) < 1e-14);
    CHECK(max_abs(dealias(high)) < 1e-14);
    SpectralRep F = to_spectral(low + high);
    CHECK(dealias_excess_fraction(F) == doctest::Approx(0.5).epsilon(1e-12));

    BoxGrid g2(2, 32, 10.0);
    Field narrow(g2);
    for (std::size_t i = 0; i < g2.size(); ++i) {
        Vec3 x = g2.point(i);
        narrow[i] = std::exp(-(x[0] * x[0] + x[1] * x[1]));
    }
    CHECK(central_mass_fraction(narrow) > 0.999);
    CHECK(central_mass_fraction(translate(narrow, {4.0, 0, 0})) < 0.5);
}

TEST_CASE("spectral interpolation is exact for trigonometric polynomials") {
    BoxGrid g(2, 16, 2 * M_PI);
    Field f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        f[i] = std::sin(2 * x[0]) + std::cos(3 * x[1]);
    }
    SpectralInterpolant I(f);
    Vec3 p{0.123, -1.7, 0}, grad;
    cplx v = I.value_and_gradient(p, grad);
    CHECK(std::abs(v - (std::sin(2 * p[0]) + std::cos(3 * p[1]))) < 1e-12);
    CHECK(std::abs(grad[0] - 2 * std::cos(2 * p[0])) < 1e-12);
    CHECK(std::abs(grad[1] + 3 * std::sin(3 * p[1])) < 1e-12);
}

TEST_CASE("snapshot round trip") {
    BoxGrid g(3, 8, 1.5);
    Field f = white(g, 11);
    std::string path = "snapshot_test.qnls";
    write_snapshot(path, f, 0.25);
    Snapshot s = read_snapshot(path);
    CHECK(s.time == 0.25);
    CHECK(s.field.grid == g);
    CHECK(max_abs(s.field - f) == 0.0);
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    char magic[5];
    REQUIRE(std::fread(magic, 1, 5, fp) == 5);
    std::fclose(fp);
    CHECK(std::string(magic, 5) == "QNLS1");
    std::remove(path.c_str());
    CHECK_THROWS(read_snapshot("does_not_exist.qnls"));
}
