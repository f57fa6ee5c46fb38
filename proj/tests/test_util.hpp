#pragma once

#include "qnls/spectral.hpp"

#include <cstdlib>
#include <random>

namespace qnls::testing {

// Random coefficients on |m_j| <= modes, zero elsewhere.
inline Field band_limited(const BoxGrid& g, unsigned seed, int modes = 4) {
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

inline Field white(const BoxGrid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& z : f.values) z = cplx(nd(rng), nd(rng));
    return f;
}

inline double rel_diff(const Field& a, const Field& b) {
    double n = l2_norm(b);
    return l2_norm(a - b) / (n > 0 ? n : 1.0);
}

} // namespace qnls::testing
