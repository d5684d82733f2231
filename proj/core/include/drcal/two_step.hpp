#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drcal/glm_lasso.hpp"
#include "drcal/model_core.hpp"

namespace drcal {

struct TwoStepConfig {
    int n_folds = 5;
    std::uint64_t seed = 0;
    int n_lambda = 100;
    double min_ratio = 0.0;  // 0 picks the grid default
    SolverOptions solver;
    bool share_lambda_initial = false;
    double level = 0.95;

    void validate() const;
};

// CV stages; each gets its own fold assignment derived from (seed, stage).
enum class CvStage : std::uint64_t { joint_outcome = 0, exposure = 1, calibrated_gamma = 2, calibrated_alpha = 3 };

CvOptions stage_cv_options(const TwoStepConfig& cfg, CvStage stage);

enum class Method { initial, two_step, debiased };
const char* to_string(Method m);

struct DrFit {
    double theta = 0.0;
    double variance = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    NuisanceFit nuisance;
    Method method = Method::two_step;
    std::optional<double> theta0;
    std::vector<std::pair<std::string, double>> lambdas;
    Eigen::Index n = 0;
    double level = 0.95;
};

// Penalized outcome regression of y on (z, x) with z penalized; for MarMean a
// regression of y on x over the z = 1 rows.
struct OutcomeFit {
    std::optional<double> theta0;
    Eigen::VectorXd alpha1;  // p + 1
    double lambda = 0.0;
};

struct InitialEstimate {
    std::optional<double> theta0;
    Eigen::VectorXd alpha1;
    Eigen::VectorXd gamma1;
    double theta1 = 0.0;
    double lambda_outcome = 0.0;
    double lambda_exposure = 0.0;
};

struct CalibratedEstimate {
    Eigen::VectorXd gamma2;
    Eigen::VectorXd alpha2;
    double theta2 = 0.0;
    double lambda_gamma = 0.0;
    double lambda_alpha = 0.0;
};

OutcomeFit fit_joint_outcome(const Dataset& data, const Family& family, const TwoStepConfig& cfg);

InitialEstimate initial_estimate(const Dataset& data, const Family& family, const TwoStepConfig& cfg);
InitialEstimate initial_estimate(const Dataset& data, const Family& family, const TwoStepConfig& cfg,
                                 const OutcomeFit& joint);

CalibratedEstimate calibrated_estimate(const Dataset& data, const Family& family, const InitialEstimate& init,
                                       const TwoStepConfig& cfg);

DrFit run_two_step(const Dataset& data, const Family& family, const TwoStepConfig& cfg);

// Sandwich variance and Wald interval at (theta, nuisance).
DrFit finish_fit(const Family& family, const Dataset& data, double theta, NuisanceFit nuisance, Method method,
                 double level);

DrFit initial_fit(const Dataset& data, const Family& family, const InitialEstimate& init, const TwoStepConfig& cfg);
DrFit two_step_fit(const Dataset& data, const Family& family, const InitialEstimate& init,
                   const CalibratedEstimate& cal, const TwoStepConfig& cfg);

}  // namespace drcal
