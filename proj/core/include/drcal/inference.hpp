#pragma once

#include <Eigen/Dense>
#include <optional>

#include "drcal/model_core.hpp"

namespace drcal {

struct IntervalEstimate {
    double theta = 0.0;
    double variance = 0.0;
    double level = 0.95;
    double low = 0.0;
    double high = 0.0;
    std::optional<double> t_stat;
};

// Standard normal quantile, |error| well below 1e-8 on (0, 1).
double normal_quantile(double p);
double normal_cdf(double x);

// Critical value z_{c/2} for a two-sided interval at the given level.
double critical_value(double level);

// E(tau^2) / E(dtau/dtheta)^2, the variance of sqrt(n)(theta-hat - theta).
double sandwich_variance(const Family& family, const Dataset& data, double theta, const Eigen::VectorXd& alpha,
                         const Eigen::VectorXd& gamma);

IntervalEstimate wald_interval(double theta, double variance, Eigen::Index n, double level = 0.95);
double t_statistic(double theta, double theta_star, double variance, Eigen::Index n);

// True when [low, high] contains theta_star.
bool covers(const IntervalEstimate& ci, double theta_star);

}  // namespace drcal
