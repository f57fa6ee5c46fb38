#include "qnls/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace qnls {

namespace {
double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double a = std::exp(-1.0 / t);
    double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}
} // namespace

double lp_profile(double r) {
    r = std::abs(r);
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    return smooth_step(2.0 - r);
}

DyadicFilterBank::DyadicFilterBank(const BoxGrid& g) : grid_(g) {
    K_ = std::max(1, static_cast<int>(std::ceil(std::log2(g.xi_max()))));
}

double DyadicFilterBank::leq_weight(int k, double r) {
    return lp_profile(std::ldexp(r, -k));
}

double DyadicFilterBank::shell_weight(int k, double r) const {
    if (k == 1) return leq_weight(1, r);
    return leq_weight(k, r) - leq_weight(k - 1, r);
}

void DyadicFilterBank::check_shell(int k) const {
    if (k < 1 || k > K_) throw std::out_of_range("DyadicFilterBank: shell index out of range");
}

Field DyadicFilterBank::project(const Field& f, int k) const {
    check_shell(k);
    require_same_grid(grid_, f.grid);
    return apply_multiplier(f, [this, k](const Vec3& xi) {
        return cplx(shell_weight(k, std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])));
    });
}

Field DyadicFilterBank::project_leq(const Field& f, int k) const {
    require_same_grid(grid_, f.grid);
    return apply_multiplier(f, [k](const Vec3& xi) {
        return cplx(leq_weight(k, std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])));
    });
}

Field DyadicFilterBank::project_gt(const Field& f, int k) const {
    return f - project_leq(f, k);
}

Field DyadicFilterBank::project_range(const Field& f, int lo, int hi) const {
    require_same_grid(grid_, f.grid);
    lo = std::max(lo, 1);
    hi = std::min(hi, K_);
    return apply_multiplier(f, [this, lo, hi](const Vec3& xi) {
        double r = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        double w = 0.0;
        for (int k = lo; k <= hi; ++k) w += shell_weight(k, r);
        return cplx(w);
    });
}

std::vector<double> DyadicFilterBank::shell_norms(const Field& f, double s) const {
    require_same_grid(grid_, f.grid);
    SpectralRep F = to_spectral(f);
    std::vector<double> acc(K_, 0.0);
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) {
        double ksq = grid_.wavenumber_sq(i);
        double r = std::sqrt(ksq);
        double w = std::pow(1.0 + ksq, s) * std::norm(F.coeffs[i]);
        if (w == 0.0) continue;
        for (int k = 1; k <= K_; ++k) {
            double p = shell_weight(k, r);
            if (p != 0.0) acc[k - 1] += p * p * w;
        }
    }
    for (auto& a : acc) a = std::sqrt(a * grid_.volume());
    return acc;
}

bool Envelope::slowly_varying(double tol) const {
    for (int j = 0; j < shells(); ++j)
        for (int k = 0; k < shells(); ++k) {
            if (c[k] == 0.0) {
                if (c[j] != 0.0) return false;
                continue;
            }
            if (c[j] / c[k] > std::exp2(delta * std::abs(j - k)) * (1.0 + tol)) return false;
        }
    return true;
}

double Envelope::l2_sum() const {
    double s = 0.0;
    for (double x : c) s += x * x;
    return s;
}

Envelope minimal_envelope(const Field& f, double s, double delta) {
    if (!(delta > 0.0 && delta <= 0.5))
        throw std::invalid_argument("minimal_envelope: delta must lie in (0, 1/2]");
    DyadicFilterBank bank(f.grid);
    auto a = bank.shell_norms(f, s);
    Envelope e;
    e.delta = delta;
    e.s = s;
    const int K = bank.shells();
    e.c.assign(K, 0.0);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < K; ++j)
            e.c[k] = std::max(e.c[k], std::exp2(-delta * std::abs(j - k)) * a[j]);
    return e;
}

bool envelope_dominates(const Envelope& e, const Field& f, double tol) {
    DyadicFilterBank bank(f.grid);
    auto a = bank.shell_norms(f, e.s);
    if (static_cast<int>(a.size()) != e.shells()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] > e.c[k] * (1.0 + tol) + tol * 1e-300) return false;
    return true;
}

void write_envelope_csv(const std::string& path, const Envelope& e) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "k,lambda,c_k\n";
    os.precision(17);
    for (int k = 1; k <= e.shells(); ++k) os << k << "," << std::exp2(k) << "," << e.at(k) << "\n";
}

std::vector<EnvelopeRow> envelope_report(const Trajectory& traj, const Envelope& env0,
                                         double s, double flag_factor) {
    DyadicFilterBank bank(traj.grid);
    std::vector<EnvelopeRow> rows;
    for (std::size_t m = 0; m < traj.size(); ++m) {
        auto a = bank.shell_norms(traj.snapshots[m], s);
        for (int k = 1; k <= std::min(bank.shells(), env0.shells()); ++k) {
            double c = env0.at(k);
            double num = a[k - 1];
            double ratio = c > 0.0 ? num / c
                                   : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            rows.push_back({traj.times[m], k, std::exp2(k), ratio, ratio > flag_factor});
        }
    }
    return rows;
}

double max_ratio(const std::vector<EnvelopeRow>& rows) {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.ratio);
    return m;
}

} // namespace qnls
