#include "drcal/debiased.hpp"

#include <cmath>
#include <string>

#include "drcal/errors.hpp"
#include "drcal/inference.hpp"

namespace drcal {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

enum class Kind { linear, loglinear, logistic };

DrFit debias(const Dataset& d, const TwoStepConfig& cfg, const OutcomeFit& joint, const DebiasedOptions& opts,
             Kind kind) {
    cfg.validate();
    if (!joint.theta0) throw ConfigError("debiased estimators need a joint fit with a z coefficient");
    const Index n = d.n();
    const double th0 = *joint.theta0;
    VectorXd eta = linear_predictors(joint.alpha1, d.x) + th0 * d.z;

    // mean model m_i and working weight w_i of the joint fit
    VectorXd m(n), w(n);
    for (Index i = 0; i < n; ++i) {
        switch (kind) {
            case Kind::linear:
                m(i) = eta(i);
                w(i) = 1.0;
                break;
            case Kind::loglinear:
                m(i) = std::exp(eta(i));
                if (!std::isfinite(m(i)))
                    throw NumericOverflow("debiased weight exp(theta0 z + alpha'x) overflows at observation " +
                                          std::to_string(i));
                w(i) = m(i);
                break;
            case Kind::logistic:
                m(i) = expit(eta(i));
                w(i) = expit2(eta(i));
                break;
        }
    }

    GlmProblem pb = make_problem(d.x, d.z, LossKind::squared);
    pb.weights = w;
    VectorXd gamma;
    double lambda = 0.0;
    try {
        CvResult cv = cv_select(pb, stage_cv_options(cfg, CvStage::exposure));
        gamma = pack_coefficients(cv.fit_at_min);
        lambda = cv.lambda_min;
    } catch (const std::exception& e) {
        throw StageError("debiased projection", e.what());
    }
    VectorXd r = d.z - linear_predictors(gamma, d.x);

    double num = 0.0, den = 0.0;
    for (Index i = 0; i < n; ++i) {
        num += (d.y(i) - m(i)) * r(i);
        den += w(i) * d.z(i) * r(i);
    }
    num /= n;
    den /= n;
    if (std::abs(den) < 1e-12) throw DegenerateDenominator("debiased denominator is zero");
    const double theta = th0 + num / den;

    // The linear residual is taken at the corrected estimate, matching the sandwich form.
    double s1 = 0.0, s2 = 0.0;
    for (Index i = 0; i < n; ++i) {
        double eps = kind == Kind::linear ? d.y(i) - theta * d.z(i) - linear_predictor(joint.alpha1, d.x.row(i).transpose())
                                          : d.y(i) - m(i);
        double u = eps * r(i);
        s1 += u;
        s2 += u * u;
    }
    s1 /= n;
    s2 /= n;
    double numv = opts.robust_variance == RobustVariance::centered ? std::max(0.0, s2 - s1 * s1) : s2;

    DrFit fit;
    fit.theta = theta;
    fit.variance = numv / (den * den);
    IntervalEstimate ci = wald_interval(theta, fit.variance, n, cfg.level);
    fit.ci_low = ci.low;
    fit.ci_high = ci.high;
    fit.nuisance = NuisanceFit{joint.alpha1, gamma, Stage::initial};
    fit.method = Method::debiased;
    fit.theta0 = th0;
    fit.lambdas = {{"outcome", joint.lambda}, {"projection", lambda}};
    fit.n = n;
    fit.level = cfg.level;
    return fit;
}

}  // namespace

DrFit debiased_linear(const Dataset& data, const TwoStepConfig& cfg, const OutcomeFit& joint,
                      const DebiasedOptions& opts) {
    return debias(data, cfg, joint, opts, Kind::linear);
}
DrFit debiased_loglinear(const Dataset& data, const TwoStepConfig& cfg, const OutcomeFit& joint,
                         const DebiasedOptions& opts) {
    return debias(data, cfg, joint, opts, Kind::loglinear);
}
DrFit debiased_logistic(const Dataset& data, const TwoStepConfig& cfg, const OutcomeFit& joint,
                        const DebiasedOptions& opts) {
    return debias(data, cfg, joint, opts, Kind::logistic);
}

DrFit debiased_linear(const Dataset& data, const TwoStepConfig& cfg, const DebiasedOptions& opts) {
    Family f = Family::partially_linear();
    validate_dataset(data, f);
    return debiased_linear(data, cfg, fit_joint_outcome(data, f, cfg), opts);
}
DrFit debiased_loglinear(const Dataset& data, const TwoStepConfig& cfg, const DebiasedOptions& opts) {
    Family f = Family::partially_loglinear();
    validate_dataset(data, f);
    return debiased_loglinear(data, cfg, fit_joint_outcome(data, f, cfg), opts);
}
DrFit debiased_logistic(const Dataset& data, const TwoStepConfig& cfg, const DebiasedOptions& opts) {
    Family f = Family::partially_logistic();
    validate_dataset(data, f);
    return debiased_logistic(data, cfg, fit_joint_outcome(data, f, cfg), opts);
}

DrFit debiased_fit(const Dataset& data, const Family& family, const TwoStepConfig& cfg, const OutcomeFit& joint,
                   const DebiasedOptions& opts) {
    switch (family.kind) {
        case FamilyKind::PartiallyLinear: return debiased_linear(data, cfg, joint, opts);
        case FamilyKind::PartiallyLogLinear: return debiased_loglinear(data, cfg, joint, opts);
        case FamilyKind::PartiallyLogistic: return debiased_logistic(data, cfg, joint, opts);
        case FamilyKind::MarMean: break;
    }
    throw ConfigError("no debiased estimator for the missing-data mean family");
}

}  // namespace drcal
