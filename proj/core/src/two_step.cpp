#include "drcal/two_step.hpp"

#include <cmath>

#include "drcal/errors.hpp"
#include "drcal/inference.hpp"
#include "drcal/rng.hpp"

namespace drcal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

GlmProblem rows_problem(const Dataset& d, const std::vector<Index>& rows, const VectorXd& response, LossKind loss) {
    const Index m = static_cast<Index>(rows.size());
    MatrixXd x(m, d.p());
    VectorXd y(m);
    for (Index k = 0; k < m; ++k) {
        x.row(k) = d.x.row(rows[static_cast<size_t>(k)]);
        y(k) = response(rows[static_cast<size_t>(k)]);
    }
    return make_problem(std::move(x), std::move(y), loss);
}

std::vector<Index> rows_where(const VectorXd& v, double value) {
    std::vector<Index> rows;
    for (Index i = 0; i < v.size(); ++i)
        if (v(i) == value) rows.push_back(i);
    return rows;
}

}  // namespace

void TwoStepConfig::validate() const {
    if (n_folds < 2) throw ConfigError("n_folds must be at least 2");
    if (n_lambda < 2) throw ConfigError("n_lambda must be at least 2");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (min_ratio != 0.0 && !(min_ratio > 0.0 && min_ratio < 1.0)) throw ConfigError("min_ratio must lie in (0, 1)");
}

CvOptions stage_cv_options(const TwoStepConfig& cfg, CvStage stage) {
    CvOptions o;
    o.n_folds = cfg.n_folds;
    o.seed = stream_key(cfg.seed, 0x5ca1ab1eULL, static_cast<std::uint64_t>(stage));
    o.n_lambda = cfg.n_lambda;
    o.min_ratio = cfg.min_ratio;
    o.solver = cfg.solver;
    return o;
}

const char* to_string(Method m) {
    switch (m) {
        case Method::initial: return "initial";
        case Method::two_step: return "two_step";
        case Method::debiased: return "db";
    }
    return "?";
}

OutcomeFit fit_joint_outcome(const Dataset& data, const Family& family, const TwoStepConfig& cfg) {
    cfg.validate();
    return staged("initial outcome fit", [&] {
        OutcomeFit out;
        const Index p = data.p();
        CvOptions o = stage_cv_options(cfg, CvStage::joint_outcome);
        if (family.kind == FamilyKind::MarMean) {
            GlmProblem pb = rows_problem(data, rows_where(data.z, 1.0), data.y, outcome_loss(family));
            CvResult cv = cv_select(pb, o);
            out.alpha1 = pack_coefficients(cv.fit_at_min);
            out.lambda = cv.lambda_min;
            return out;
        }
        MatrixXd zx(data.n(), p + 1);
        zx.col(0) = data.z;
        zx.rightCols(p) = data.x;
        GlmProblem pb = make_problem(std::move(zx), data.y, outcome_loss(family));
        CvResult cv = cv_select(pb, o);
        const LassoFit& f = cv.fit_at_min;
        out.theta0 = f.coefficients(0);
        out.alpha1.resize(p + 1);
        out.alpha1(0) = f.intercept;
        out.alpha1.tail(p) = f.coefficients.tail(p);
        out.lambda = cv.lambda_min;
        return out;
    });
}

InitialEstimate initial_estimate(const Dataset& data, const Family& family, const TwoStepConfig& cfg) {
    return initial_estimate(data, family, cfg, fit_joint_outcome(data, family, cfg));
}

InitialEstimate initial_estimate(const Dataset& data, const Family& family, const TwoStepConfig& cfg,
                                 const OutcomeFit& joint) {
    cfg.validate();
    InitialEstimate est;
    est.theta0 = joint.theta0;
    est.alpha1 = joint.alpha1;
    est.lambda_outcome = joint.lambda;
    staged("initial exposure fit", [&] {
        GlmProblem pb;
        if (family.kind == FamilyKind::PartiallyLogistic)
            pb = rows_problem(data, rows_where(data.y, 0.0), data.z, exposure_loss(family.psi_f));
        else
            pb = make_problem(data.x, data.z, exposure_loss(family.psi_f));
        CvResult cv = cv_select(pb, stage_cv_options(cfg, CvStage::exposure));
        est.gamma1 = pack_coefficients(cv.fit_at_min);
        est.lambda_exposure = cv.lambda_min;
        return 0;
    });
    est.theta1 = staged("initial theta", [&] {
        return solve_theta(family, data, NuisanceFit{est.alpha1, est.gamma1, Stage::initial});
    });
    return est;
}

CalibratedEstimate calibrated_estimate(const Dataset& data, const Family& family, const InitialEstimate& init,
                                       const TwoStepConfig& cfg) {
    cfg.validate();
    CalibratedEstimate cal;
    const Index p = data.p();

    if (family.kind == FamilyKind::PartiallyLinear) {
        cal.gamma2 = init.gamma1;
        cal.lambda_gamma = init.lambda_exposure;
    } else {
        staged("calibrated exposure fit", [&] {
            GlmProblem pb = build_l2_problem(family, data, init.theta1, init.alpha1);
            CvResult cv = cv_select(pb, stage_cv_options(cfg, CvStage::calibrated_gamma));
            cal.gamma2 = pack_coefficients(cv.fit_at_min);
            cal.lambda_gamma = cv.lambda_min;
            return 0;
        });
    }

    staged("calibrated outcome fit", [&] {
        if (cfg.share_lambda_initial) {
            if (family.kind != FamilyKind::PartiallyLinear || !init.theta0)
                throw ConfigError("share_lambda_initial applies to the partially linear family only");
            // Same lambda and offset as the joint fit, so the joint solution restricted
            // to alpha is already optimal.
            GlmProblem pb = build_l1_problem(family, data, *init.theta0, cal.gamma2);
            LassoFit warm;
            warm.intercept = init.alpha1(0);
            warm.coefficients = init.alpha1.tail(p);
            LassoFit f = fit_lasso(pb, init.lambda_outcome, &warm, cfg.solver);
            cal.alpha2 = pack_coefficients(f);
            cal.lambda_alpha = init.lambda_outcome;
            return 0;
        }
        GlmProblem pb = build_l1_problem(family, data, init.theta1, cal.gamma2);
        CvResult cv = cv_select(pb, stage_cv_options(cfg, CvStage::calibrated_alpha));
        cal.alpha2 = pack_coefficients(cv.fit_at_min);
        cal.lambda_alpha = cv.lambda_min;
        return 0;
    });

    cal.theta2 = staged("calibrated theta", [&] {
        return solve_theta(family, data, NuisanceFit{cal.alpha2, cal.gamma2, Stage::calibrated});
    });
    return cal;
}

DrFit finish_fit(const Family& family, const Dataset& data, double theta, NuisanceFit nuisance, Method method,
                 double level) {
    DrFit fit;
    fit.theta = theta;
    fit.variance = staged("variance", [&] {
        return sandwich_variance(family, data, theta, nuisance.alpha, nuisance.gamma);
    });
    IntervalEstimate ci = wald_interval(theta, fit.variance, data.n(), level);
    fit.ci_low = ci.low;
    fit.ci_high = ci.high;
    fit.nuisance = std::move(nuisance);
    fit.method = method;
    fit.n = data.n();
    fit.level = level;
    return fit;
}

DrFit initial_fit(const Dataset& data, const Family& family, const InitialEstimate& init, const TwoStepConfig& cfg) {
    DrFit f = finish_fit(family, data, init.theta1, NuisanceFit{init.alpha1, init.gamma1, Stage::initial},
                         Method::initial, cfg.level);
    f.theta0 = init.theta0;
    f.lambdas = {{"outcome", init.lambda_outcome}, {"exposure", init.lambda_exposure}};
    return f;
}

DrFit two_step_fit(const Dataset& data, const Family& family, const InitialEstimate& init,
                   const CalibratedEstimate& cal, const TwoStepConfig& cfg) {
    DrFit f = finish_fit(family, data, cal.theta2, NuisanceFit{cal.alpha2, cal.gamma2, Stage::calibrated},
                         Method::two_step, cfg.level);
    f.theta0 = init.theta0;
    f.lambdas = {{"outcome", init.lambda_outcome},
                 {"exposure", init.lambda_exposure},
                 {"calibrated_exposure", cal.lambda_gamma},
                 {"calibrated_outcome", cal.lambda_alpha}};
    return f;
}

DrFit run_two_step(const Dataset& data, const Family& family, const TwoStepConfig& cfg) {
    cfg.validate();
    validate_dataset(data, family);
    InitialEstimate init = initial_estimate(data, family, cfg);
    CalibratedEstimate cal = calibrated_estimate(data, family, init, cfg);
    return two_step_fit(data, family, init, cal, cfg);
}

}  // namespace drcal
