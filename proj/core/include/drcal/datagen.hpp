#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>

#include "drcal/model_core.hpp"
#include "drcal/rng.hpp"

namespace drcal {

enum class SettingId { C1, C2, C3, C4, C5, C6, C7, C8, C9 };

SettingId parse_setting(const std::string& id);
std::string to_string(SettingId id);
double theta_star(SettingId id);
Family family_for(SettingId id);
int min_p(SettingId id);

constexpr double kGaussianNoiseVariance = 0.5;

struct Setting {
    SettingId id = SettingId::C1;
    double theta_star = 3.0;
    Eigen::Index n = 400;
    Eigen::Index p = 100;
    // C7-C9: beta2 = -0.25 and the alternative nonlinear terms.
    bool alt_odds_ratio = false;
    double noise_variance = kGaussianNoiseVariance;  // Gaussian outcome noise in C1-C3

    static Setting make(SettingId id, Eigen::Index n, Eigen::Index p, bool alt_odds_ratio = false);
    void validate() const;
};

struct LinearLogit {
    double beta0 = 0.0;
    Eigen::VectorXd beta1;
};

struct QuadraticLogit {
    double beta0 = 0.0;
    Eigen::VectorXd beta1;
    Eigen::MatrixXd omega;
};

// P(Z=1 | x) = expit(beta0 + beta1'x) when X | Z=k ~ N(mu_k, sigma) and P(Z=1) = q.
LinearLogit discriminant_logit_linear(const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1,
                                      const Eigen::MatrixXd& sigma, double q);
// P(Z=1 | x) = expit(beta0 + beta1'x + x'omega x) with class covariances sigma0, sigma1.
QuadraticLogit discriminant_logit_quadratic(const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1,
                                            const Eigen::MatrixXd& sigma0, const Eigen::MatrixXd& sigma1, double q);

// C3 draws X ~ N(0, I) and then Z | X from this logit, the C1 formula read literally.
LinearLogit c3_exposure_logit(Eigen::Index p);

// Exposure class means for C1, C2 and C4-C6.
Eigen::VectorXd class_mean(SettingId id, Eigen::Index p);

// Normalized 2x2 table, indexed [z][y].
struct CellProbs {
    double p[2][2];
};

CellProbs odds_ratio_cell_probs(double theta_star, double beta1, double beta2, double h1, double h2);
CellProbs odds_ratio_cell_probs(const Eigen::VectorXd& x, double theta_star, double beta1, double beta2,
                                const std::function<double(const Eigen::VectorXd&)>& h1,
                                const std::function<double(const Eigen::VectorXd&)>& h2);

struct OddsRatioSpec {
    double beta1 = 0.0;
    double beta2 = 0.0;
    std::function<double(const Eigen::VectorXd&)> h1;
    std::function<double(const Eigen::VectorXd&)> h2;
};

OddsRatioSpec odds_ratio_spec(const Setting& s);

Dataset gen_setting(const Setting& s, const RngStream& rng);

}  // namespace drcal
