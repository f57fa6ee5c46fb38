#pragma once

#include "qnls/spectral.hpp"
#include "qnls/trajectory.hpp"

#include <string>
#include <vector>

namespace qnls {

// Smooth even bump: 1 on [0,1], 0 beyond 2.
double lp_profile(double r);

class DyadicFilterBank {
public:
    explicit DyadicFilterBank(const BoxGrid& g);

    const BoxGrid& grid() const { return grid_; }
    // Shells are numbered 1..K with K = ceil(log2 xi_max).
    int shells() const { return K_; }

    // p_k(|ξ|); p_1 = ψ(ξ/2), p_k = ψ(2^{-k}ξ) - ψ(2^{-k+1}ξ).
    double shell_weight(int k, double r) const;
    // ψ(2^{-k}|ξ|), defined for every integer k.
    static double leq_weight(int k, double r);

    Field project(const Field& f, int k) const;
    Field project_leq(const Field& f, int k) const;
    Field project_gt(const Field& f, int k) const;
    // Σ_{j=lo}^{hi} P_j with the range clipped to 1..K.
    Field project_range(const Field& f, int lo, int hi) const;

    std::vector<double> shell_norms(const Field& f, double s) const;

private:
    void check_shell(int k) const;
    BoxGrid grid_;
    int K_;
};

struct Envelope {
    std::vector<double> c; // c[k-1] is the coefficient for shell k
    double delta = 0.1;
    double s = 0.0;

    int shells() const { return static_cast<int>(c.size()); }
    double at(int k) const { return c.at(k - 1); }
    bool slowly_varying(double tol = 1e-12) const;
    double l2_sum() const;
};

Envelope minimal_envelope(const Field& f, double s, double delta = 0.1);
bool envelope_dominates(const Envelope& e, const Field& f, double tol = 1e-12);
void write_envelope_csv(const std::string& path, const Envelope& e);

struct EnvelopeRow {
    double time;
    int k;
    double lambda;
    double ratio;
    bool flagged;
};

std::vector<EnvelopeRow> envelope_report(const Trajectory& traj, const Envelope& env0,
                                         double s, double flag_factor = 2.0);
double max_ratio(const std::vector<EnvelopeRow>& rows);

} // namespace qnls
