#include "qnls/littlewood_paley.hpp"
#include "qnls/model.hpp"
#include "qnls/stats.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace qnls;
using qnls::testing::band_limited;

namespace {

Field bump(const BoxGrid& g, double eps, double width, const Vec3& c = {0, 0, 0}) {
    Field f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        double r2 = 0.0;
        for (int d = 0; d < g.dim(); ++d) r2 += (x[d] - c[d]) * (x[d] - c[d]);
        f[i] = eps * std::exp(-r2 / (width * width));
    }
    return f;
}

} // namespace

TEST_CASE("monomial parsing and evaluation") {
    Factor f = parse_factor("d1ubar");
    CHECK(f.conj);
    CHECK(f.axis == 1);
    CHECK(factor_token(f) == "d1ubar");
    CHECK_FALSE(parse_factor("u").conj);
    CHECK(parse_factor("u").axis == -1);
    CHECK_THROWS_AS(parse_factor("v"), std::invalid_argument);

    Nonlinearity N;
    N.terms.push_back({cplx(2.0, 0.0), {parse_factor("u"), parse_factor("d0ubar"), parse_factor("d0u")}});
    cplx u(0.3, 0.1), du[3] = {cplx(0.2, -0.4), 0.0, 0.0};
    CHECK(std::abs(N.eval(u, du) - 2.0 * u * std::conj(du[0]) * du[0]) < 1e-15);
    CHECK(N.needs_gradient());
    CHECK(N.terms[0].charge() == 1);
    CHECK(N.terms[0].derivative_count() == 2);

    // Directional derivative against a central difference.
    cplx w(0.05, 0.2), dw[3] = {cplx(-0.1, 0.3), 0.0, 0.0};
    const double h = 1e-6;
    cplx up = u + h * w, um = u - h * w;
    cplx dup[3] = {du[0] + h * dw[0], 0.0, 0.0}, dum[3] = {du[0] - h * dw[0], 0.0, 0.0};
    cplx fd = (N.eval(up, dup) - N.eval(um, dum)) / (2 * h);
    CHECK(std::abs(N.deriv(u, du, w, dw) - fd) < 1e-9);
}

TEST_CASE("model validation") {
    CHECK_NOTHROW(ModelSpec::quasilinear_iso(2, 1.0).validate());
    ModelSpec bad = ModelSpec::semilinear_cubic(2);
    bad.metric = Metric::plugin([](cplx) { return Mat3{2, 0, 0, 0, 2, 0, 0, 0, 2}; });
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.metric = Metric::plugin([](cplx u) {
        return Mat3{1, std::abs(u), 0, 0, 1, 0, 0, 0, 1};
    });
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.metric = Metric::iso_abs2(-8.0); // loses positivity at |u| = 0.5
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    ModelSpec deriv3 = ModelSpec::semilinear_cubic(1);
    deriv3.N.terms.push_back({1.0, {parse_factor("d0u"), parse_factor("d0ubar"), parse_factor("d0u")}});
    CHECK_THROWS_AS(deriv3.validate(), std::invalid_argument);
    CHECK_THROWS_AS(Metric::aniso_abs2(1.0, Mat3{1, 2, 0, 0, 1, 0, 0, 0, 1}), std::invalid_argument);

    ModelSpec m = ModelSpec::quasilinear_iso(2, 0.7);
    m.N.terms.push_back({cplx(0.0, 0.5), {parse_factor("u"), parse_factor("d1ubar"), parse_factor("d0u")}});
    ModelSpec back = ModelSpec::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    CHECK(back.metric.kappa() == 0.7);
    nlohmann::json j = m.to_json();
    j["metric"]["kind"] = "nonsense";
    CHECK_THROWS_AS(ModelSpec::from_json(j), std::invalid_argument);
    CHECK(ModelSpec::semilinear_cubic(2).has_phase_rotation());
}

TEST_CASE("cubic-structure validator") {
    auto ok = validate_cubic(ModelSpec::quasilinear_iso(2, 1.0));
    CHECK(ok.pass);
    CHECK(ok.metric_slope == doctest::Approx(2.0).epsilon(0.01));
    CHECK(ok.nonlinearity_slope == doctest::Approx(3.0).epsilon(0.01));

    ModelSpec lin = ModelSpec::semilinear_cubic(2);
    lin.metric = Metric::linear_re(1.0);
    auto r = validate_cubic(lin);
    CHECK_FALSE(r.pass);
    CHECK(r.metric_slope == doctest::Approx(1.0).epsilon(0.02));

    ModelSpec zero;
    zero.dim = 2;
    auto z = validate_cubic(zero);
    CHECK(z.pass);
    CHECK(z.metric_vacuous);
    CHECK(z.nonlinearity_vacuous);

    std::vector<double> ms, ns;
    for (unsigned s = 1; s <= 10; ++s) {
        auto v = validate_cubic(ModelSpec::quasilinear_iso(2, 1.0), s);
        ms.push_back(v.metric_slope);
        ns.push_back(v.nonlinearity_slope);
    }
    CHECK(stddev(ms) <= 0.02);
    CHECK(stddev(ns) <= 0.02);
}

TEST_CASE("truncated metric") {
    BoxGrid g(2, 64, 2 * M_PI);
    ModelSpec m = ModelSpec::quasilinear_iso(2, 1.0);
    const int k = 4;
    MetricField id = truncated_metric(m, Field(g), k);
    for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l)
            for (const auto& v : id(j, l).values) REQUIRE(v == cplx(j == l ? 1.0 : 0.0));
    CHECK_THROWS_AS(truncated_metric(m, Field(g), 2), std::invalid_argument);

    Field high(g);
    for (std::size_t i = 0; i < g.size(); ++i) high[i] = 0.3 * std::exp(cplx(0.0, 21.0 * g.point(i)[0]));
    MetricField th = truncated_metric(m, high, 3); // |ξ| = 21 ≥ 2^{k+2}
    for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l)
            for (std::size_t i = 0; i < g.size(); ++i)
                REQUIRE(std::abs(th(j, l)[i] - (j == l ? 1.0 : 0.0)) <= 1e-10);

    // P_{≤k−3} u = u for this u, so the direct composition applies.
    Field u = band_limited(g, 3, 1);
    u *= 0.2 / max_abs(u);
    DyadicFilterBank bank(g);
    Field abs2(g);
    for (std::size_t i = 0; i < g.size(); ++i) abs2[i] = std::norm(u[i]);
    Field want = bank.project_leq(abs2, k - 1);
    MetricField tm = truncated_metric(m, u, k);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        err = std::max(err, std::abs(tm(0, 0)[i] - 1.0 - want[i].real()));
        err = std::max(err, std::abs(tm(0, 1)[i]));
    }
    CHECK(err <= 1e-12);

    ModelSpec an = ModelSpec::semilinear_cubic(2);
    an.metric = Metric::aniso_abs2(0.8, Mat3{1, 0.3, 0, 0.3, 0.5, 0, 0, 0, 1});
    MetricField ta = truncated_metric(an, band_limited(g, 4, 3), k);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(std::abs(ta(0, 1)[i] - ta(1, 0)[i]) <= 1e-12);
}

TEST_CASE("bicharacteristics") {
    BoxGrid g(2, 64, 40.0);
    const Vec3 x0{-10.0, 0.7, 0.0}, xi0{std::cos(0.3), std::sin(0.3), 0.0};
    auto flat = bicharacteristic_trace(identity_metric(g), x0, xi0, 10.0, 0.05);
    CHECK(flat.max_xi_deviation == 0.0);
    CHECK(flat.max_H_drift == 0.0);
    const auto& xe = flat.x.back();
    CHECK(std::abs(xe[0] - (x0[0] + 20.0 * xi0[0])) < 1e-10);
    CHECK(std::abs(xe[1] - (x0[1] + 20.0 * xi0[1])) < 1e-10);
    CHECK_THROWS_AS(bicharacteristic_trace(identity_metric(g), x0, {2, 0, 0}, 1.0, 0.1), std::invalid_argument);

    ModelSpec m = ModelSpec::quasilinear_iso(2, 1.0);
    std::vector<double> eps{0.2, 0.1, 0.05}, dev;
    for (double e : eps) {
        auto b = bicharacteristic_trace(metric_field(m, bump(g, e, 3.0)), x0, xi0, 50.0, 0.05);
        CHECK(b.max_H_drift <= 1e-6);
        dev.push_back(b.max_xi_deviation);
    }
    CHECK(loglog_fit(eps, dev).slope >= 1.8);
}
