#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "drcal/glm_lasso.hpp"
#include "drcal/model_core.hpp"

namespace drcal::testing {

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& eng, Eigen::Index n, Eigen::Index q) {
    std::normal_distribution<double> norm;
    Eigen::MatrixXd m(n, q);
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = norm(eng);
    return m;
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& eng, Eigen::Index n, double sd = 1.0) {
    std::normal_distribution<double> norm(0.0, sd);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = norm(eng);
    return v;
}

// Response drawn from the loss's own model at a sparse truth.
inline GlmProblem random_problem(std::mt19937_64& eng, LossKind loss, Eigen::Index n, Eigen::Index q,
                                 bool random_weights) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd x = gaussian_matrix(eng, n, q);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(q, 4); ++j) beta(j) = 0.8 * (unif(eng) - 0.4);
    Eigen::VectorXd eta = (x * beta).array() + 0.2;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (loss) {
            case LossKind::squared:
                y(i) = eta(i) + std::normal_distribution<double>()(eng);
                break;
            case LossKind::logistic:
            case LossKind::calibration_expit:
                y(i) = unif(eng) < expit(eta(i)) ? 1.0 : 0.0;
                break;
            case LossKind::poisson:
                y(i) = static_cast<double>(std::poisson_distribution<int>(std::exp(eta(i)))(eng));
                break;
        }
    }
    GlmProblem prob = make_problem(std::move(x), std::move(y), loss);
    if (random_weights)
        for (Eigen::Index i = 0; i < n; ++i) prob.weights(i) = 0.2 + 2.0 * unif(eng);
    return prob;
}

// Dataset with binary z and a mix of linear signal, used by the estimator tests.
inline Dataset random_dataset(std::mt19937_64& eng, const Family& family, Eigen::Index n, Eigen::Index p) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset d;
    d.x = gaussian_matrix(eng, n, p);
    d.z.resize(n);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double ef = 0.3 * d.x(i, 0) - 0.4 * d.x(i, 1);
        d.z(i) = unif(eng) < expit(ef) ? 1.0 : 0.0;
        double eg = 0.5 + 0.6 * d.x(i, 0) + 0.3 * d.x(i, 2);
        switch (family.kind) {
            case FamilyKind::PartiallyLinear:
                d.y(i) = 1.5 * d.z(i) + eg + std::normal_distribution<double>()(eng);
                break;
            case FamilyKind::PartiallyLogLinear:
                d.y(i) = std::poisson_distribution<int>(std::exp(0.5 * d.z(i) + 0.5 * eg))(eng);
                break;
            case FamilyKind::PartiallyLogistic:
                d.y(i) = unif(eng) < expit(0.7 * d.z(i) + eg - 0.5) ? 1.0 : 0.0;
                break;
            case FamilyKind::MarMean:
                d.y(i) = family.psi_g == Link::Expit ? (unif(eng) < expit(eg) ? 1.0 : 0.0)
                                                     : eg + std::normal_distribution<double>()(eng);
                break;
        }
    }
    return d;
}

inline Eigen::VectorXd random_coef(std::mt19937_64& eng, Eigen::Index p, double scale) {
    return gaussian_vector(eng, p + 1, scale);
}

}  // namespace drcal::testing
