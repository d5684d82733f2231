#include "drcal/inference.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "drcal/errors.hpp"

namespace drcal {

using Eigen::Index;
using Eigen::VectorXd;

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Acklam's rational approximation followed by one Halley step on erfc.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -INFINITY;
        if (p == 1.0) return INFINITY;
        throw InvalidProblem("normal_quantile: p must lie in [0, 1]");
    }
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    for (int k = 0; k < 2; ++k) {
        double e = normal_cdf(x) - p;
        double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
        x = x - u / (1 + x * u / 2);
    }
    return x;
}

double critical_value(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidProblem("level must lie in (0, 1)");
    return normal_quantile(0.5 + level / 2.0);
}

double sandwich_variance(const Family& family, const Dataset& data, double theta, const VectorXd& alpha,
                         const VectorXd& gamma) {
    if (alpha.size() != data.p() + 1 || gamma.size() != data.p() + 1)
        throw InvalidProblem("nuisance coefficients must have p + 1 entries");
    VectorXd eg = linear_predictors(alpha, data.x);
    VectorXd ef = linear_predictors(gamma, data.x);
    double s2 = 0.0, h = 0.0;
    for (Index i = 0; i < data.n(); ++i) {
        double t = tau_eta(family, data.y(i), data.z(i), theta, eg(i), ef(i));
        s2 += t * t;
        h += dtau_dtheta_eta(family, data.y(i), data.z(i), theta, eg(i), ef(i));
    }
    const double n = static_cast<double>(data.n());
    h /= n;
    if (std::abs(h) < 1e-12) throw DegenerateDenominator("mean of dtau/dtheta is zero");
    return (s2 / n) / (h * h);
}

IntervalEstimate wald_interval(double theta, double variance, Index n, double level) {
    if (!(variance >= 0.0)) throw InvalidProblem("variance must be nonnegative");
    if (n < 1) throw InvalidProblem("n must be positive");
    double half = critical_value(level) * std::sqrt(variance / static_cast<double>(n));
    IntervalEstimate ci;
    ci.theta = theta;
    ci.variance = variance;
    ci.level = level;
    ci.low = theta - half;
    ci.high = theta + half;
    return ci;
}

double t_statistic(double theta, double theta_star, double variance, Index n) {
    if (!(variance > 0.0)) throw UndefinedStatistic("t statistic needs a positive variance");
    return (theta - theta_star) / std::sqrt(variance / static_cast<double>(n));
}

bool covers(const IntervalEstimate& ci, double theta_star) {
    return ci.low <= theta_star && theta_star <= ci.high;
}

}  // namespace drcal
