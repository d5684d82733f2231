#include "drcal/model_core.hpp"

#include <cmath>
#include <string>

#include "drcal/errors.hpp"

namespace drcal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPropensityFloor = 1e-12;
constexpr double kDenominatorFloor = 1e-12;

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

bool all_binary(const VectorXd& v) {
    for (Index i = 0; i < v.size(); ++i)
        if (!is_binary(v(i))) return false;
    return true;
}

double checked_exp(double u, const char* what, Index i) {
    double e = std::exp(u);
    if (!std::isfinite(e))
        throw NumericOverflow(std::string(what) + " overflows at observation " + std::to_string(i));
    return e;
}

double propensity(const Family& f, double eta_f) {
    return link_value(f.psi_f, eta_f);
}

void check_propensity(double fv, Index i) {
    if (!(fv > kPropensityFloor))
        throw PropensityUnderflow("propensity " + std::to_string(fv) + " at observation " +
                                  std::to_string(i) + " is too small");
}

void check_dims(const Dataset& d, const NuisanceFit& nf) {
    if (nf.alpha.size() != d.p() + 1 || nf.gamma.size() != d.p() + 1)
        throw InvalidProblem("nuisance coefficients must have p + 1 entries");
    if (d.y.size() != d.n() || d.z.size() != d.n()) throw InvalidProblem("y, z and x disagree on n");
}

}  // namespace

Family Family::partially_linear(Link psi_f) {
    return {FamilyKind::PartiallyLinear, Link::Identity, psi_f};
}
Family Family::partially_loglinear() {
    return {FamilyKind::PartiallyLogLinear, Link::Identity, Link::Expit};
}
Family Family::partially_logistic() {
    return {FamilyKind::PartiallyLogistic, Link::Expit, Link::Expit};
}
Family Family::mar_mean(Link psi_g) {
    return {FamilyKind::MarMean, psi_g, Link::Expit};
}

const char* to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::PartiallyLinear: return "pl";
        case FamilyKind::PartiallyLogLinear: return "pll";
        case FamilyKind::PartiallyLogistic: return "plogit";
        case FamilyKind::MarMean: return "marmean";
    }
    return "?";
}

Family parse_family(const std::string& id) {
    if (id == "pl") return Family::partially_linear();
    if (id == "pll") return Family::partially_loglinear();
    if (id == "plogit") return Family::partially_logistic();
    if (id == "marmean") return Family::mar_mean(Link::Identity);
    if (id == "marmean-logit") return Family::mar_mean(Link::Expit);
    throw ConfigError("unknown family '" + id + "' (expected pl, pll, plogit, marmean, marmean-logit)");
}

double expit(double u) {
    if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
    double e = std::exp(u);
    return e / (1.0 + e);
}

double expit2(double u) {
    double p = expit(u);
    return p * (1.0 - p);
}

double link_value(Link l, double u) {
    return l == Link::Identity ? u : expit(u);
}

double link_deriv(Link l, double u) {
    return l == Link::Identity ? 1.0 : expit2(u);
}

double linear_predictor(const VectorXd& coef, const VectorXd& x) {
    return coef(0) + coef.tail(coef.size() - 1).dot(x);
}

VectorXd linear_predictors(const VectorXd& coef, const MatrixXd& x) {
    VectorXd eta = x * coef.tail(coef.size() - 1);
    eta.array() += coef(0);
    return eta;
}

VectorXd pack_coefficients(const LassoFit& fit) {
    VectorXd c(fit.coefficients.size() + 1);
    c(0) = fit.intercept;
    c.tail(fit.coefficients.size()) = fit.coefficients;
    return c;
}

void validate_dataset(const Dataset& d, const Family& f) {
    const Index n = d.n();
    if (n == 0) throw ValidationError("dataset is empty");
    if (d.y.size() != n || d.z.size() != n) throw ValidationError("y, z and x disagree on the number of rows");
    for (Index i = 0; i < n; ++i) {
        const std::string row = "row " + std::to_string(i + 1);
        if (!is_binary(d.z(i))) throw ValidationError(row + ": z must be 0 or 1");
        if (!d.x.row(i).allFinite()) throw ValidationError(row + ": non-finite covariate");
        double y = d.y(i);
        if (f.kind == FamilyKind::MarMean) {
            if (d.z(i) == 1.0 && !std::isfinite(y)) throw ValidationError(row + ": y missing where z = 1");
            if (d.z(i) == 1.0 && f.psi_g == Link::Expit && !is_binary(y))
                throw ValidationError(row + ": y must be 0 or 1");
            continue;
        }
        if (!std::isfinite(y)) throw ValidationError(row + ": y is missing or non-finite");
        if (f.kind == FamilyKind::PartiallyLogistic && !is_binary(y))
            throw ValidationError(row + ": y must be 0 or 1 for the logistic family");
        if (f.kind == FamilyKind::PartiallyLogLinear && y < 0.0)
            throw ValidationError(row + ": y must be nonnegative for the log-linear family");
    }
}

double tau_eta(const Family& fam, double y, double z, double theta, double eta_g, double eta_f) {
    double fv = propensity(fam, eta_f);
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear:
            return (y - theta * z - link_value(fam.psi_g, eta_g)) * (z - fv);
        case FamilyKind::PartiallyLogLinear:
            return (y * std::exp(-theta * z) - std::exp(eta_g)) * (z - fv);
        case FamilyKind::PartiallyLogistic:
            return std::exp(-theta * z * y) * (y - expit(eta_g)) * (z - fv);
        case FamilyKind::MarMean: {
            check_propensity(fv, -1);
            double zy = z == 0.0 ? 0.0 : z * y;
            return zy / fv - (z / fv - 1.0) * link_value(fam.psi_g, eta_g) - theta;
        }
    }
    return 0.0;
}

double dtau_dtheta_eta(const Family& fam, double y, double z, double theta, double eta_g, double eta_f) {
    double fv = propensity(fam, eta_f);
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear:
            return -z * (z - fv);
        case FamilyKind::PartiallyLogLinear:
            return -z * y * std::exp(-theta * z) * (z - fv);
        case FamilyKind::PartiallyLogistic:
            return -z * y * std::exp(-theta * z * y) * (y - expit(eta_g)) * (z - fv);
        case FamilyKind::MarMean:
            return -1.0;
    }
    return 0.0;
}

double dtau_deta_f(const Family& fam, double y, double z, double theta, double eta_g, double eta_f) {
    double fd = link_deriv(fam.psi_f, eta_f);
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear:
            return -(y - theta * z - link_value(fam.psi_g, eta_g)) * fd;
        case FamilyKind::PartiallyLogLinear:
            return -(y * std::exp(-theta * z) - std::exp(eta_g)) * fd;
        case FamilyKind::PartiallyLogistic:
            return -std::exp(-theta * z * y) * (y - expit(eta_g)) * fd;
        case FamilyKind::MarMean: {
            if (z == 0.0) return 0.0;
            double fv = propensity(fam, eta_f);
            check_propensity(fv, -1);
            return -z * fd / (fv * fv) * (y - link_value(fam.psi_g, eta_g));
        }
    }
    return 0.0;
}

double dtau_deta_g(const Family& fam, double y, double z, double theta, double eta_g, double eta_f) {
    double fv = propensity(fam, eta_f);
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear:
            return -link_deriv(fam.psi_g, eta_g) * (z - fv);
        case FamilyKind::PartiallyLogLinear:
            return -std::exp(eta_g) * (z - fv);
        case FamilyKind::PartiallyLogistic:
            return -std::exp(-theta * z * y) * expit2(eta_g) * (z - fv);
        case FamilyKind::MarMean:
            check_propensity(fv, -1);
            return -(z / fv - 1.0) * link_deriv(fam.psi_g, eta_g);
    }
    return 0.0;
}

double tau(const Family& fam, double y, double z, const VectorXd& xi, double theta, const VectorXd& alpha,
           const VectorXd& gamma) {
    return tau_eta(fam, y, z, theta, linear_predictor(alpha, xi), linear_predictor(gamma, xi));
}

double dtau_dtheta(const Family& fam, double y, double z, const VectorXd& xi, double theta,
                   const VectorXd& alpha, const VectorXd& gamma) {
    return dtau_dtheta_eta(fam, y, z, theta, linear_predictor(alpha, xi), linear_predictor(gamma, xi));
}

namespace {

struct Predictors {
    VectorXd eg, ef, fv;
};

Predictors predictors(const Family& fam, const Dataset& d, const NuisanceFit& nf) {
    check_dims(d, nf);
    Predictors p{linear_predictors(nf.alpha, d.x), linear_predictors(nf.gamma, d.x), {}};
    p.fv.resize(d.n());
    for (Index i = 0; i < d.n(); ++i) {
        p.fv(i) = propensity(fam, p.ef(i));
        if (fam.kind == FamilyKind::MarMean) check_propensity(p.fv(i), i);
    }
    return p;
}

}  // namespace

double mean_tau(const Family& fam, const Dataset& d, double theta, const NuisanceFit& nf) {
    Predictors P = predictors(fam, d, nf);
    double s = 0.0;
    for (Index i = 0; i < d.n(); ++i) s += tau_eta(fam, d.y(i), d.z(i), theta, P.eg(i), P.ef(i));
    return s / static_cast<double>(d.n());
}

VectorXd mean_dtau_dgamma(const Family& fam, const Dataset& d, double theta, const NuisanceFit& nf) {
    Predictors P = predictors(fam, d, nf);
    VectorXd g = VectorXd::Zero(d.p() + 1);
    for (Index i = 0; i < d.n(); ++i) {
        double s = dtau_deta_f(fam, d.y(i), d.z(i), theta, P.eg(i), P.ef(i));
        g(0) += s;
        g.tail(d.p()) += s * d.x.row(i).transpose();
    }
    return g / static_cast<double>(d.n());
}

VectorXd mean_dtau_dalpha(const Family& fam, const Dataset& d, double theta, const NuisanceFit& nf) {
    Predictors P = predictors(fam, d, nf);
    VectorXd g = VectorXd::Zero(d.p() + 1);
    for (Index i = 0; i < d.n(); ++i) {
        double s = dtau_deta_g(fam, d.y(i), d.z(i), theta, P.eg(i), P.ef(i));
        g(0) += s;
        g.tail(d.p()) += s * d.x.row(i).transpose();
    }
    return g / static_cast<double>(d.n());
}

double solve_theta_bisection(const Family& fam, const Dataset& d, const NuisanceFit& nf, double lo, double hi) {
    Predictors P = predictors(fam, d, nf);
    auto eq = [&](double th) {
        double s = 0.0;
        for (Index i = 0; i < d.n(); ++i) s += tau_eta(fam, d.y(i), d.z(i), th, P.eg(i), P.ef(i));
        return s;
    };
    double flo = eq(lo), fhi = eq(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw DegenerateDenominator("estimating equation has no sign change on [" + std::to_string(lo) +
                                    ", " + std::to_string(hi) + "]");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = eq(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double solve_theta(const Family& fam, const Dataset& d, const NuisanceFit& nf) {
    Predictors P = predictors(fam, d, nf);
    const Index n = d.n();
    const bool zbin = all_binary(d.z);

    auto ratio_to_theta = [](double num, double den) {
        if (std::abs(den) < kDenominatorFloor) throw DegenerateDenominator("closed-form denominator is zero");
        double r = num / den;
        if (!(r > 0.0)) throw NonPositiveRatio("closed-form ratio " + std::to_string(r) + " is not positive");
        return -std::log(r);
    };

    switch (fam.kind) {
        case FamilyKind::PartiallyLinear: {
            double num = 0.0, den = 0.0;
            for (Index i = 0; i < n; ++i) {
                double r = d.z(i) - P.fv(i);
                num += (d.y(i) - link_value(fam.psi_g, P.eg(i))) * r;
                den += d.z(i) * r;
            }
            if (std::abs(den / n) < kDenominatorFloor) throw DegenerateDenominator("E{z (z - f)} is zero");
            return num / den;
        }
        case FamilyKind::PartiallyLogLinear: {
            if (!zbin) return solve_theta_bisection(fam, d, nf);
            double num = 0.0, den = 0.0;
            for (Index i = 0; i < n; ++i) {
                double g = std::exp(P.eg(i));
                if (d.z(i) == 1.0) {
                    num += g * (1.0 - P.fv(i));
                    den += d.y(i) * (1.0 - P.fv(i));
                } else {
                    num += (d.y(i) - g) * P.fv(i);
                }
            }
            return ratio_to_theta(num / n, den / n);
        }
        case FamilyKind::PartiallyLogistic: {
            if (!zbin || !all_binary(d.y)) return solve_theta_bisection(fam, d, nf);
            double num = 0.0, den = 0.0;
            for (Index i = 0; i < n; ++i) {
                double a = expit(P.eg(i));
                if (d.z(i) == 1.0 && d.y(i) == 1.0)
                    den += (1.0 - a) * (1.0 - P.fv(i));
                else
                    num -= (d.y(i) - a) * (d.z(i) - P.fv(i));
            }
            return ratio_to_theta(num / n, den / n);
        }
        case FamilyKind::MarMean: {
            double s = 0.0;
            for (Index i = 0; i < n; ++i) {
                double zy = d.z(i) == 0.0 ? 0.0 : d.z(i) * d.y(i);
                s += zy / P.fv(i) - (d.z(i) / P.fv(i) - 1.0) * link_value(fam.psi_g, P.eg(i));
            }
            return s / n;
        }
    }
    return 0.0;
}

LossKind exposure_loss(Link psi_f) {
    return psi_f == Link::Expit ? LossKind::logistic : LossKind::squared;
}

LossKind outcome_loss(const Family& fam) {
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear: return LossKind::squared;
        case FamilyKind::PartiallyLogLinear: return LossKind::poisson;
        case FamilyKind::PartiallyLogistic: return LossKind::logistic;
        case FamilyKind::MarMean: return fam.psi_g == Link::Expit ? LossKind::logistic : LossKind::squared;
    }
    return LossKind::squared;
}

GlmProblem build_l2_problem(const Family& fam, const Dataset& d, double theta1, const VectorXd& alpha1) {
    if (!alpha1.allFinite() || !std::isfinite(theta1)) throw InvalidProblem("non-finite initial estimates");
    if (alpha1.size() != d.p() + 1) throw InvalidProblem("alpha must have p + 1 entries");
    const Index n = d.n();
    GlmProblem pb = make_problem(d.x, d.z, exposure_loss(fam.psi_f));
    VectorXd eg = linear_predictors(alpha1, d.x);
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear:
            break;
        case FamilyKind::PartiallyLogLinear:
            for (Index i = 0; i < n; ++i) pb.weights(i) = checked_exp(eg(i), "weight exp(alpha'x)", i);
            break;
        case FamilyKind::PartiallyLogistic:
            for (Index i = 0; i < n; ++i)
                pb.weights(i) = checked_exp(-theta1 * d.z(i) * d.y(i), "weight exp(-theta z y)", i) * expit2(eg(i));
            break;
        case FamilyKind::MarMean:
            if (fam.psi_f != Link::Expit)
                throw ConfigError("the missing-data calibration loss is implemented for an expit propensity link");
            pb.loss = LossKind::calibration_expit;
            for (Index i = 0; i < n; ++i) pb.weights(i) = link_deriv(fam.psi_g, eg(i));
            break;
    }
    return pb;
}

std::vector<Index> l1_rows(const Family& fam, const Dataset& d) {
    std::vector<Index> rows;
    for (Index i = 0; i < d.n(); ++i)
        if (fam.kind != FamilyKind::MarMean || d.z(i) == 1.0) rows.push_back(i);
    return rows;
}

GlmProblem build_l1_problem(const Family& fam, const Dataset& d, double theta1, const VectorXd& gamma2) {
    if (!gamma2.allFinite() || !std::isfinite(theta1)) throw InvalidProblem("non-finite calibrated estimates");
    if (gamma2.size() != d.p() + 1) throw InvalidProblem("gamma must have p + 1 entries");
    const Index n = d.n();
    VectorXd ef = linear_predictors(gamma2, d.x);
    VectorXd fd(n);
    for (Index i = 0; i < n; ++i) fd(i) = link_deriv(fam.psi_f, ef(i));

    if (fam.kind == FamilyKind::MarMean) {
        std::vector<Index> rows = l1_rows(fam, d);
        const Index m = static_cast<Index>(rows.size());
        if (m == 0) throw InvalidProblem("no observed outcomes (z = 1 rows)");
        GlmProblem pb;
        pb.design.resize(m, d.p());
        pb.response.resize(m);
        pb.weights.resize(m);
        pb.offset = VectorXd::Zero(m);
        pb.loss = outcome_loss(fam);
        for (Index k = 0; k < m; ++k) {
            Index i = rows[static_cast<size_t>(k)];
            pb.design.row(k) = d.x.row(i);
            pb.response(k) = d.y(i);
            if (fam.psi_f == Link::Expit) {
                pb.weights(k) = checked_exp(-ef(i), "weight exp(-gamma'x)", i);
            } else {
                check_propensity(ef(i), i);
                pb.weights(k) = 1.0 / (ef(i) * ef(i));
            }
        }
        return pb;
    }

    GlmProblem pb = make_problem(d.x, d.y, outcome_loss(fam));
    switch (fam.kind) {
        case FamilyKind::PartiallyLinear:
            pb.offset = theta1 * d.z;
            pb.weights = fd;
            break;
        case FamilyKind::PartiallyLogLinear:
            pb.offset = theta1 * d.z;
            for (Index i = 0; i < n; ++i)
                pb.weights(i) = checked_exp(-theta1 * d.z(i), "weight exp(-theta z)", i) * fd(i);
            break;
        case FamilyKind::PartiallyLogistic:
            for (Index i = 0; i < n; ++i)
                pb.weights(i) = checked_exp(-theta1 * d.z(i) * d.y(i), "weight exp(-theta z y)", i) * fd(i);
            break;
        case FamilyKind::MarMean:
            break;
    }
    return pb;
}

}  // namespace drcal
