#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "drcal/glm_lasso.hpp"

namespace drcal {

// Outcome y, exposure z, covariates x. Regressors are x itself with the constant
// carried as element 0 of every coefficient vector.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    Eigen::MatrixXd x;

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }
};

enum class FamilyKind { PartiallyLinear, PartiallyLogLinear, PartiallyLogistic, MarMean };
enum class Link { Identity, Expit };

struct Family {
    FamilyKind kind = FamilyKind::PartiallyLinear;
    Link psi_g = Link::Identity;
    Link psi_f = Link::Expit;

    static Family partially_linear(Link psi_f = Link::Expit);
    static Family partially_loglinear();
    static Family partially_logistic();
    static Family mar_mean(Link psi_g = Link::Identity);
};

const char* to_string(FamilyKind k);
// Accepts pl, pll, plogit, marmean (and marmean-logit for an expit outcome link).
Family parse_family(const std::string& id);

enum class Stage { initial, calibrated };

struct NuisanceFit {
    Eigen::VectorXd alpha;  // p + 1, intercept first
    Eigen::VectorXd gamma;  // p + 1, intercept first
    Stage stage = Stage::initial;
};

double expit(double u);
double expit2(double u);  // expit(u) (1 - expit(u))
double link_value(Link l, double u);
double link_deriv(Link l, double u);

// coef(0) + x . coef.tail(p)
double linear_predictor(const Eigen::VectorXd& coef, const Eigen::VectorXd& x);
Eigen::VectorXd linear_predictors(const Eigen::VectorXd& coef, const Eigen::MatrixXd& x);
// Packs a lasso fit as (intercept, coefficients).
Eigen::VectorXd pack_coefficients(const LassoFit& fit);

// Throws ValidationError naming the first offending row.
void validate_dataset(const Dataset& data, const Family& family);

// Estimating function at one observation; xi is the raw covariate row.
double tau(const Family& family, double y, double z, const Eigen::VectorXd& xi, double theta,
           const Eigen::VectorXd& alpha, const Eigen::VectorXd& gamma);
double dtau_dtheta(const Family& family, double y, double z, const Eigen::VectorXd& xi, double theta,
                   const Eigen::VectorXd& alpha, const Eigen::VectorXd& gamma);

// Same quantities given the linear predictors eta_g = alpha'xi, eta_f = gamma'xi.
double tau_eta(const Family& family, double y, double z, double theta, double eta_g, double eta_f);
double dtau_dtheta_eta(const Family& family, double y, double z, double theta, double eta_g, double eta_f);
// Partial derivatives of tau in eta_f and eta_g; multiply by (1, x) for the gamma/alpha gradients.
double dtau_deta_f(const Family& family, double y, double z, double theta, double eta_g, double eta_f);
double dtau_deta_g(const Family& family, double y, double z, double theta, double eta_g, double eta_f);

// Sample means over all n observations; gradients are p + 1 vectors, intercept first.
double mean_tau(const Family& family, const Dataset& data, double theta, const NuisanceFit& nuisance);
Eigen::VectorXd mean_dtau_dgamma(const Family& family, const Dataset& data, double theta,
                                 const NuisanceFit& nuisance);
Eigen::VectorXd mean_dtau_dalpha(const Family& family, const Dataset& data, double theta,
                                 const NuisanceFit& nuisance);

// Root of the sample estimating equation. Closed forms for binary z; bisection on
// [-20, 20] otherwise.
double solve_theta(const Family& family, const Dataset& data, const NuisanceFit& nuisance);
double solve_theta_bisection(const Family& family, const Dataset& data, const NuisanceFit& nuisance,
                             double lo = -20.0, double hi = 20.0);

// Problem whose penalized minimizer is gamma-hat-2 (response z).
GlmProblem build_l2_problem(const Family& family, const Dataset& data, double theta1,
                            const Eigen::VectorXd& alpha1);
// Problem whose penalized minimizer is alpha-hat-2. For MarMean only the z = 1 rows enter.
GlmProblem build_l1_problem(const Family& family, const Dataset& data, double theta1,
                            const Eigen::VectorXd& gamma2);
std::vector<Eigen::Index> l1_rows(const Family& family, const Dataset& data);

// Model-based loss for the exposure fit of z on x under psi_f.
LossKind exposure_loss(Link psi_f);
// Loss for the outcome regression under the family's outcome model.
LossKind outcome_loss(const Family& family);

}  // namespace drcal
