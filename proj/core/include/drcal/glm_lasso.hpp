#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace drcal {

enum class LossKind {
    squared,            // 0.5 (y - eta)^2
    logistic,           // -y eta + log(1 + e^eta)
    poisson,            // -y eta + e^eta
    calibration_expit,  // y e^-eta + (1 - y) eta, y is a binary indicator
};

const char* to_string(LossKind k);

// Weighted L1-penalized GLM. The intercept is implicit and never penalized.
struct GlmProblem {
    Eigen::MatrixXd design;          // n x q
    Eigen::VectorXd response;        // n
    Eigen::VectorXd weights;         // n, nonnegative
    Eigen::VectorXd offset;          // n, empty means zero
    LossKind loss = LossKind::squared;
    Eigen::VectorXd penalty_factor;  // q, empty means all ones; 0 leaves a column unpenalized
    bool standardize = true;

    Eigen::Index n() const { return design.rows(); }
    Eigen::Index q() const { return design.cols(); }

    // Throws InvalidProblem on shape mismatch, negative or all-zero weights, non-finite entries.
    void validate() const;
    double penalty(Eigen::Index j) const { return penalty_factor.size() ? penalty_factor(j) : 1.0; }
};

// Builds a problem with unit weights and zero offset.
GlmProblem make_problem(Eigen::MatrixXd design, Eigen::VectorXd response, LossKind loss);

struct LassoFit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;  // original scale
    double lambda = 0.0;
    double objective = 0.0;
    int n_iterations = 0;
    bool converged = false;

    Eigen::Index nonzero() const;
};

struct SolverOptions {
    double tol = 1e-7;           // max_j c_j (delta beta_j)^2 on the standardized scale
    int max_sweeps = 100000;
    int max_irls = 100;
    double working_weight_floor = 1e-5;
    std::vector<double>* objective_trace = nullptr;  // penalized objective after every sweep
};

double soft_threshold(double z, double t);

// Penalized objective (1/W) sum w_i l_i + lambda sum_j pf_j s_j |beta_j|, with s_j the
// weighted column SD when the problem standardizes and 1 otherwise.
double penalized_objective(const GlmProblem& problem, double intercept,
                           const Eigen::VectorXd& beta, double lambda);
double mean_loss(const GlmProblem& problem, double intercept, const Eigen::VectorXd& beta);

double lambda_max(const GlmProblem& problem);
double default_min_ratio(const GlmProblem& problem);
Eigen::VectorXd lambda_path(const GlmProblem& problem, int n_lambda, double min_ratio);

LassoFit fit_lasso(const GlmProblem& problem, double lambda, const LassoFit* warm_start,
                   const SolverOptions& opts);
LassoFit fit_lasso(const GlmProblem& problem, double lambda, const LassoFit* warm_start = nullptr,
                   double tol = 1e-7, int max_iter = 100000);

// Warm-started fits along a descending grid.
std::vector<LassoFit> fit_path(const GlmProblem& problem, const Eigen::VectorXd& lambdas,
                               const SolverOptions& opts = {});

// Gradient of the unpenalized mean loss, scaled to the penalty's units: at a solution
// |g_j + lambda pf_j sign(beta_j)| ~ 0 on the support and |g_j| <= lambda pf_j off it.
Eigen::VectorXd kkt_residual(const GlmProblem& problem, const LassoFit& fit);

// Largest violation of the subgradient conditions.
double kkt_violation(const GlmProblem& problem, const LassoFit& fit);

enum class CvMeasure { automatic, mse, deviance, loss };

struct CvOptions {
    int n_folds = 5;
    std::uint64_t seed = 0;
    CvMeasure measure = CvMeasure::automatic;
    int n_lambda = 100;
    double min_ratio = 0.0;  // 0 picks default_min_ratio
    SolverOptions solver;
};

struct CvResult {
    Eigen::VectorXd lambda_grid;
    Eigen::VectorXd cv_mean;
    Eigen::VectorXd cv_se;
    double lambda_min = 0.0;
    Eigen::Index index_min = 0;
    LassoFit fit_at_min;
    std::vector<int> fold_assignment;
};

std::vector<int> assign_folds(Eigen::Index n, int n_folds, std::uint64_t seed);

CvResult cv_select(const GlmProblem& problem, const CvOptions& opts);
CvResult cv_select(const GlmProblem& problem, int n_folds, std::uint64_t seed,
                   CvMeasure measure = CvMeasure::automatic);

// Per-observation held-out measure at linear predictor eta.
double pointwise_measure(LossKind loss, CvMeasure measure, double y, double eta);

GlmProblem subset_rows(const GlmProblem& problem, const std::vector<Eigen::Index>& rows);

}  // namespace drcal
