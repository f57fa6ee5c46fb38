#pragma once

#include <vector>

namespace qnls {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    // 95% half-width from the Student t quantile for n-2 degrees of freedom.
    double slope_halfwidth = 0.0;
    int points = 0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Fit of log(y) against log(x); nonpositive entries are rejected.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

} // namespace qnls
