#include "drcal/glm_lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "drcal/errors.hpp"
#include "drcal/rng.hpp"

namespace drcal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kEtaClamp = 30.0;
constexpr double kExpLimit = 700.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct LossEval {
    double l, g, h;
};

double softplus(double eta) {
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double expit(double eta) {
    return 1.0 / (1.0 + std::exp(-eta));
}

// Returns false on exponent overflow.
bool eval_loss(LossKind k, double y, double eta, LossEval& out) {
    switch (k) {
        case LossKind::squared: {
            double r = y - eta;
            out = {0.5 * r * r, -r, 1.0};
            return true;
        }
        case LossKind::logistic: {
            double p = expit(std::clamp(eta, -kEtaClamp, kEtaClamp));
            out = {-y * eta + softplus(eta), p - y, p * (1.0 - p)};
            return true;
        }
        case LossKind::poisson: {
            if (eta > kExpLimit) return false;
            double mu = std::exp(eta);
            out = {-y * eta + mu, mu - y, mu};
            return true;
        }
        case LossKind::calibration_expit: {
            if (-eta > kExpLimit) return false;
            double e = std::exp(-eta);
            out = {y * e + (1.0 - y) * eta, 1.0 - y - y * e, y * e};
            return true;
        }
    }
    return false;
}

[[noreturn]] void throw_overflow(LossKind k, Index i, double eta) {
    throw NumericOverflow(std::string(to_string(k)) + " loss: exponent overflow at observation " +
                          std::to_string(i) + " (linear predictor " + std::to_string(eta) + ")");
}

// Centered and scaled copy of the design plus normalized weights.
struct Prepared {
    const GlmProblem* pb = nullptr;
    MatrixXd xs;
    VectorXd mean, scale, wbar, offset, pf;
    std::vector<char> dead;
    Index n = 0, q = 0;

    explicit Prepared(const GlmProblem& p) : pb(&p), n(p.n()), q(p.q()) {
        p.validate();
        wbar = p.weights / p.weights.sum();
        offset = p.offset.size() ? p.offset : VectorXd::Zero(n);
        pf.resize(q);
        for (Index j = 0; j < q; ++j) pf(j) = p.penalty(j);
        mean = p.design.transpose() * wbar;
        scale = VectorXd::Ones(q);
        dead.assign(static_cast<size_t>(q), 0);
        xs = p.design;
        for (Index j = 0; j < q; ++j) {
            xs.col(j).array() -= mean(j);
            double var = (xs.col(j).array().square() * wbar.array()).sum();
            double sd = std::sqrt(var);
            if (!(sd > 1e-10 * (1.0 + std::abs(mean(j))))) {
                dead[j] = 1;
                xs.col(j).setZero();
                continue;
            }
            if (p.standardize) {
                scale(j) = sd;
                xs.col(j) /= sd;
            }
        }
    }

    double threshold(Index j, double lambda) const {
        return pf(j) == 0.0 ? 0.0 : lambda * pf(j);
    }

    // Mean weighted loss; +inf on overflow, or throws when strict.
    double loss_at(const VectorXd& eta, bool strict) const {
        double s = 0.0;
        LossEval e{};
        for (Index i = 0; i < n; ++i) {
            if (wbar(i) == 0.0) continue;
            if (!eval_loss(pb->loss, pb->response(i), eta(i), e)) {
                if (strict) throw_overflow(pb->loss, i, eta(i));
                return kInf;
            }
            s += wbar(i) * e.l;
        }
        return s;
    }

    double penalty_at(const VectorXd& b, double lambda) const {
        double pen = 0.0;
        for (Index j = 0; j < q; ++j)
            if (b(j) != 0.0 && pf(j) != 0.0) pen += pf(j) * std::abs(b(j));
        return pen > 0.0 ? lambda * pen : 0.0;
    }

    VectorXd eta_of(double b0, const VectorXd& b) const {
        VectorXd eta = offset;
        eta.array() += b0;
        eta.noalias() += xs * b;
        return eta;
    }

    double null_intercept() const {
        const VectorXd& y = pb->response;
        switch (pb->loss) {
            case LossKind::squared:
                return wbar.dot(y - offset);
            case LossKind::logistic: {
                double m = wbar.dot(y);
                if (m <= 0.0) return -kEtaClamp;
                if (m >= 1.0) return kEtaClamp;
                return std::clamp(std::log(m / (1.0 - m)), -kEtaClamp, kEtaClamp);
            }
            case LossKind::poisson: {
                double num = wbar.dot(y);
                double den = 0.0;
                for (Index i = 0; i < n; ++i)
                    if (wbar(i) > 0) den += wbar(i) * std::exp(std::min(offset(i), kExpLimit));
                if (num <= 0.0) return -10.0;
                return std::clamp(std::log(num / den), -kExpLimit / 2, kExpLimit / 2);
            }
            case LossKind::calibration_expit: {
                double w1 = wbar.dot(y);
                double w0 = 1.0 - w1;
                if (w1 <= 0.0) return -kEtaClamp;
                if (w0 <= 0.0) return kEtaClamp;
                return std::clamp(std::log(w1 / w0), -kEtaClamp, kEtaClamp);
            }
        }
        return 0.0;
    }

    void clamp_intercept(double& b0) const {
        if (pb->loss == LossKind::logistic || pb->loss == LossKind::calibration_expit)
            b0 = std::clamp(b0, -kEtaClamp, kEtaClamp);
    }

    LassoFit to_fit(double b0, const VectorXd& b, double lambda) const {
        LassoFit f;
        f.coefficients = VectorXd::Zero(q);
        for (Index j = 0; j < q; ++j)
            if (!dead[j]) f.coefficients(j) = b(j) / scale(j);
        f.intercept = b0 - mean.dot(f.coefficients);
        f.lambda = lambda;
        return f;
    }

    void from_fit(const LassoFit& f, double& b0, VectorXd& b) const {
        if (f.coefficients.size() != q) throw InvalidProblem("warm start has wrong dimension");
        b.resize(q);
        for (Index j = 0; j < q; ++j) b(j) = dead[j] ? 0.0 : f.coefficients(j) * scale(j);
        b0 = f.intercept + mean.dot(f.coefficients);
    }
};

LassoFit solve(const Prepared& P, double lambda, double b0, VectorXd b, const SolverOptions& o) {
    const GlmProblem& pb = *P.pb;
    const Index n = P.n, q = P.q;
    const bool quadratic = pb.loss == LossKind::squared;
    for (Index j = 0; j < q; ++j)
        if (P.dead[j]) b(j) = 0.0;
    P.clamp_intercept(b0);

    VectorXd eta = P.eta_of(b0, b);
    double obj = P.loss_at(eta, true) + P.penalty_at(b, lambda);

    VectorXd v(n), r(n), c(q), nb;
    std::vector<char> active(static_cast<size_t>(q), 0);
    for (Index j = 0; j < q; ++j) active[j] = b(j) != 0.0;

    int sweeps = 0;
    bool converged = false;
    bool exhausted = false;
    auto record = [&](double nb0, const VectorXd& bb) {
        if (!o.objective_trace) return;
        VectorXd e = P.eta_of(nb0, bb);
        o.objective_trace->push_back(P.loss_at(e, false) + P.penalty_at(bb, lambda));
    };
    if (o.objective_trace) o.objective_trace->push_back(obj);

    for (int it = 0; it < o.max_irls && !exhausted; ++it) {
        LossEval e{};
        for (Index i = 0; i < n; ++i) {
            if (!eval_loss(pb.loss, pb.response(i), eta(i), e)) throw_overflow(pb.loss, i, eta(i));
            double h = quadratic ? 1.0 : std::max(e.h, o.working_weight_floor);
            v(i) = P.wbar(i) * h;
            r(i) = -P.wbar(i) * e.g;
        }
        const double sumv = v.sum();
        for (Index j = 0; j < q; ++j)
            c(j) = P.dead[j] ? 0.0 : (P.xs.col(j).array().square() * v.array()).sum();

        nb = b;
        double nb0 = b0;

        auto update_intercept = [&](double& dlx) {
            if (sumv <= 0.0) return;
            double d = r.sum() / sumv;
            double target = nb0 + d;
            P.clamp_intercept(target);
            d = target - nb0;
            if (d == 0.0) return;
            nb0 = target;
            r -= d * v;
            dlx = std::max(dlx, sumv * d * d);
        };
        auto update_coord = [&](Index j, double& dlx) {
            if (P.dead[j] || c(j) <= 0.0) return;
            double u = c(j) * nb(j) + P.xs.col(j).dot(r);
            double nj = soft_threshold(u, P.threshold(j, lambda)) / c(j);
            double d = nj - nb(j);
            if (d == 0.0) return;
            nb(j) = nj;
            r.noalias() -= d * (v.cwiseProduct(P.xs.col(j)));
            dlx = std::max(dlx, c(j) * d * d);
            active[j] = 1;
        };

        bool inner_ok = false;
        while (!exhausted) {
            double dlx = 0.0;
            for (Index j = 0; j < q; ++j) update_coord(j, dlx);
            update_intercept(dlx);
            ++sweeps;
            if (quadratic) record(nb0, nb);
            if (dlx < o.tol) {
                inner_ok = true;
                break;
            }
            while (true) {
                if (sweeps >= o.max_sweeps) {
                    exhausted = true;
                    break;
                }
                double dla = 0.0;
                for (Index j = 0; j < q; ++j)
                    if (active[j]) update_coord(j, dla);
                update_intercept(dla);
                ++sweeps;
                if (quadratic) record(nb0, nb);
                if (dla < o.tol) break;
            }
            if (sweeps >= o.max_sweeps) exhausted = true;
        }

        if (quadratic) {
            b = nb;
            b0 = nb0;
            eta = P.eta_of(b0, b);
            obj = P.loss_at(eta, true) + P.penalty_at(b, lambda);
            converged = inner_ok;
            break;
        }

        // Damped proximal Newton step on the true objective.
        double outer = sumv * (nb0 - b0) * (nb0 - b0);
        for (Index j = 0; j < q; ++j) outer = std::max(outer, c(j) * (nb(j) - b(j)) * (nb(j) - b(j)));

        double t = 1.0;
        bool accepted = false;
        VectorXd cb;
        double cb0 = b0, cobj = obj;
        VectorXd ceta;
        for (int k = 0; k < 60; ++k) {
            cb = b + t * (nb - b);
            cb0 = b0 + t * (nb0 - b0);
            ceta = P.eta_of(cb0, cb);
            cobj = P.loss_at(ceta, false) + P.penalty_at(cb, lambda);
            if (std::isfinite(cobj) && cobj <= obj + 1e-13 * std::max(1.0, std::abs(obj))) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // No descent available at working precision.
            converged = inner_ok;
            break;
        }
        b = cb;
        b0 = cb0;
        eta = ceta;
        obj = cobj;
        if (o.objective_trace) o.objective_trace->push_back(obj);
        if (inner_ok && t == 1.0 && outer < o.tol) {
            converged = true;
            break;
        }
        if (inner_ok && t * t * outer < o.tol * 1e-6) {
            converged = true;
            break;
        }
    }

    // Stopping rules watch step sizes; only report convergence if the subgradient
    // conditions also hold. Catches objectives that are unbounded below.
    if (converged && !exhausted) {
        VectorXd g(n);
        LossEval e{};
        for (Index i = 0; i < n; ++i) {
            if (!eval_loss(pb.loss, pb.response(i), eta(i), e)) {
                converged = false;
                break;
            }
            g(i) = P.wbar(i) * e.g;
        }
        const double kkt_tol = 10.0 * std::sqrt(o.tol);
        if (converged && std::abs(g.sum()) > kkt_tol) converged = false;
        for (Index j = 0; converged && j < q; ++j) {
            if (P.dead[j]) continue;
            double gj = P.xs.col(j).dot(g);
            double t = P.threshold(j, lambda);
            double viol = b(j) != 0.0 ? std::abs(gj + t * (b(j) > 0 ? 1.0 : -1.0)) : std::abs(gj) - t;
            if (viol > kkt_tol) converged = false;
        }
    }

    LassoFit f = P.to_fit(b0, b, lambda);
    f.objective = obj;
    f.n_iterations = sweeps;
    f.converged = converged && !exhausted;
    return f;
}

LassoFit solve_from(const Prepared& P, double lambda, const LassoFit* warm, const SolverOptions& o) {
    double b0;
    VectorXd b;
    if (warm) {
        P.from_fit(*warm, b0, b);
    } else {
        b0 = P.null_intercept();
        b = VectorXd::Zero(P.q);
    }
    return solve(P, lambda, b0, std::move(b), o);
}

double lambda_max_prepared(const Prepared& P, const SolverOptions& o) {
    LassoFit null = solve_from(P, kInf, nullptr, o);
    double b0;
    VectorXd b;
    P.from_fit(null, b0, b);
    VectorXd eta = P.eta_of(b0, b);
    VectorXd g(P.n);
    LossEval e{};
    for (Index i = 0; i < P.n; ++i) {
        if (!eval_loss(P.pb->loss, P.pb->response(i), eta(i), e)) throw_overflow(P.pb->loss, i, eta(i));
        g(i) = P.wbar(i) * e.g;
    }
    double lm = 0.0;
    for (Index j = 0; j < P.q; ++j) {
        if (P.dead[j] || P.pf(j) == 0.0) continue;
        lm = std::max(lm, std::abs(P.xs.col(j).dot(g)) / P.pf(j));
    }
    return lm;
}

VectorXd make_grid(double lmax, int n_lambda, double min_ratio) {
    if (n_lambda < 2) throw InvalidProblem("lambda path needs at least 2 values");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw InvalidProblem("min_ratio must lie in (0, 1)");
    if (!(lmax > 0.0)) lmax = 1e-12;
    VectorXd grid(n_lambda);
    double step = std::log(min_ratio) / (n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) grid(k) = lmax * std::exp(step * k);
    grid(n_lambda - 1) = lmax * min_ratio;
    return grid;
}

}  // namespace

const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::squared: return "squared";
        case LossKind::logistic: return "logistic";
        case LossKind::poisson: return "poisson";
        case LossKind::calibration_expit: return "calibration_expit";
    }
    return "?";
}

void GlmProblem::validate() const {
    const Index n = design.rows();
    if (n == 0) throw InvalidProblem("empty design");
    if (response.size() != n || weights.size() != n || (offset.size() != 0 && offset.size() != n))
        throw InvalidProblem("design, response, weights and offset must have the same number of rows");
    if (penalty_factor.size() != 0 && penalty_factor.size() != design.cols())
        throw InvalidProblem("penalty_factor must have one entry per column");
    if (!design.allFinite()) throw InvalidProblem("design has non-finite entries");
    if (!response.allFinite()) throw InvalidProblem("response has non-finite entries");
    if (offset.size() && !offset.allFinite()) throw InvalidProblem("offset has non-finite entries");
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (!std::isfinite(weights(i)) || weights(i) < 0.0)
            throw InvalidProblem("weight at observation " + std::to_string(i) + " is negative or non-finite");
        total += weights(i);
    }
    if (!(total > 0.0)) throw InvalidProblem("all weights are zero");
    for (Index j = 0; j < penalty_factor.size(); ++j)
        if (!(penalty_factor(j) >= 0.0)) throw InvalidProblem("penalty factors must be nonnegative");
}

GlmProblem make_problem(MatrixXd design, VectorXd response, LossKind loss) {
    GlmProblem p;
    const Index n = design.rows();
    p.design = std::move(design);
    p.response = std::move(response);
    p.weights = VectorXd::Ones(n);
    p.offset = VectorXd::Zero(n);
    p.loss = loss;
    return p;
}

Index LassoFit::nonzero() const {
    return (coefficients.array() != 0.0).count();
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double mean_loss(const GlmProblem& problem, double intercept, const VectorXd& beta) {
    problem.validate();
    VectorXd eta = problem.design * beta;
    eta.array() += intercept;
    if (problem.offset.size()) eta += problem.offset;
    const double W = problem.weights.sum();
    double s = 0.0;
    LossEval e{};
    for (Index i = 0; i < problem.n(); ++i) {
        if (problem.weights(i) == 0.0) continue;
        if (!eval_loss(problem.loss, problem.response(i), eta(i), e)) throw_overflow(problem.loss, i, eta(i));
        s += problem.weights(i) * e.l;
    }
    return s / W;
}

double penalized_objective(const GlmProblem& problem, double intercept, const VectorXd& beta,
                           double lambda) {
    double loss = mean_loss(problem, intercept, beta);
    Prepared P(problem);
    double pen = 0.0;
    for (Index j = 0; j < problem.q(); ++j)
        if (beta(j) != 0.0 && P.pf(j) != 0.0) pen += P.pf(j) * P.scale(j) * std::abs(beta(j));
    return loss + (pen > 0.0 ? lambda * pen : 0.0);
}

double lambda_max(const GlmProblem& problem) {
    Prepared P(problem);
    return lambda_max_prepared(P, SolverOptions{});
}

double default_min_ratio(const GlmProblem& problem) {
    return problem.q() >= problem.n() ? 1e-2 : 1e-4;
}

VectorXd lambda_path(const GlmProblem& problem, int n_lambda, double min_ratio) {
    return make_grid(lambda_max(problem), n_lambda, min_ratio);
}

LassoFit fit_lasso(const GlmProblem& problem, double lambda, const LassoFit* warm_start,
                   const SolverOptions& opts) {
    if (!(lambda >= 0.0)) throw InvalidProblem("lambda must be nonnegative");
    if (!(opts.tol > 0.0)) throw InvalidProblem("tol must be positive");
    Prepared P(problem);
    return solve_from(P, lambda, warm_start, opts);
}

LassoFit fit_lasso(const GlmProblem& problem, double lambda, const LassoFit* warm_start, double tol,
                   int max_iter) {
    SolverOptions o;
    o.tol = tol;
    o.max_sweeps = max_iter;
    return fit_lasso(problem, lambda, warm_start, o);
}

std::vector<LassoFit> fit_path(const GlmProblem& problem, const VectorXd& lambdas,
                               const SolverOptions& opts) {
    Prepared P(problem);
    std::vector<LassoFit> out;
    out.reserve(static_cast<size_t>(lambdas.size()));
    for (Index k = 0; k < lambdas.size(); ++k)
        out.push_back(solve_from(P, lambdas(k), out.empty() ? nullptr : &out.back(), opts));
    return out;
}

VectorXd kkt_residual(const GlmProblem& problem, const LassoFit& fit) {
    Prepared P(problem);
    VectorXd eta = problem.design * fit.coefficients;
    eta.array() += fit.intercept;
    eta += P.offset;
    VectorXd g(P.n);
    LossEval e{};
    for (Index i = 0; i < P.n; ++i) {
        if (!eval_loss(problem.loss, problem.response(i), eta(i), e)) throw_overflow(problem.loss, i, eta(i));
        g(i) = P.wbar(i) * e.g;
    }
    VectorXd out = problem.design.transpose() * g;
    for (Index j = 0; j < P.q; ++j) out(j) = P.dead[j] ? 0.0 : out(j) / P.scale(j);
    return out;
}

double kkt_violation(const GlmProblem& problem, const LassoFit& fit) {
    VectorXd g = kkt_residual(problem, fit);
    double worst = 0.0;
    for (Index j = 0; j < g.size(); ++j) {
        double t = problem.penalty(j) * fit.lambda;
        double b = fit.coefficients(j);
        double viol;
        if (problem.penalty(j) == 0.0)
            viol = std::abs(g(j));
        else if (b != 0.0)
            viol = std::abs(g(j) + t * (b > 0 ? 1.0 : -1.0));
        else
            viol = std::max(0.0, std::abs(g(j)) - t);
        worst = std::max(worst, viol);
    }
    return worst;
}

GlmProblem subset_rows(const GlmProblem& problem, const std::vector<Index>& rows) {
    GlmProblem s;
    const Index m = static_cast<Index>(rows.size());
    s.design.resize(m, problem.q());
    s.response.resize(m);
    s.weights.resize(m);
    s.offset.resize(m);
    for (Index k = 0; k < m; ++k) {
        Index i = rows[static_cast<size_t>(k)];
        s.design.row(k) = problem.design.row(i);
        s.response(k) = problem.response(i);
        s.weights(k) = problem.weights(i);
        s.offset(k) = problem.offset.size() ? problem.offset(i) : 0.0;
    }
    s.loss = problem.loss;
    s.penalty_factor = problem.penalty_factor;
    s.standardize = problem.standardize;
    return s;
}

std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw InvalidProblem("need at least 2 folds");
    if (n < n_folds) throw InvalidProblem("fewer observations than folds");
    std::vector<Index> perm(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    std::uint64_t state = stream_key(seed, 0xf01d5ULL);
    for (Index i = n - 1; i > 0; --i) {
        state = splitmix64(state);
        Index k = static_cast<Index>(state % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(k)]);
    }
    std::vector<int> fold(static_cast<size_t>(n));
    for (Index pos = 0; pos < n; ++pos)
        fold[static_cast<size_t>(perm[static_cast<size_t>(pos)])] = static_cast<int>(pos % n_folds);
    return fold;
}

double pointwise_measure(LossKind loss, CvMeasure measure, double y, double eta) {
    if (measure == CvMeasure::automatic)
        measure = loss == LossKind::squared ? CvMeasure::mse
                  : loss == LossKind::calibration_expit ? CvMeasure::loss
                                                        : CvMeasure::deviance;
    LossEval e{};
    switch (measure) {
        case CvMeasure::mse:
            return (y - eta) * (y - eta);
        case CvMeasure::loss:
            if (!eval_loss(loss, y, eta, e)) return kInf;
            return e.l;
        case CvMeasure::deviance:
            switch (loss) {
                case LossKind::squared:
                    return (y - eta) * (y - eta);
                case LossKind::logistic: {
                    double ent = 0.0;
                    if (y > 0.0 && y < 1.0) ent = -(y * std::log(y) + (1 - y) * std::log(1 - y));
                    return 2.0 * (-y * eta + softplus(eta) - ent);
                }
                case LossKind::poisson: {
                    if (eta > kExpLimit) return kInf;
                    double mu = std::exp(eta);
                    double ylog = y > 0.0 ? y * std::log(y / mu) : 0.0;
                    return 2.0 * (ylog - (y - mu));
                }
                case LossKind::calibration_expit:
                    if (!eval_loss(loss, y, eta, e)) return kInf;
                    return e.l;
            }
            break;
        case CvMeasure::automatic:
            break;
    }
    return kInf;
}

CvResult cv_select(const GlmProblem& problem, const CvOptions& opts) {
    problem.validate();
    const Index n = problem.n();
    const int K = opts.n_folds;
    CvResult res;
    res.fold_assignment = assign_folds(n, K, opts.seed);

    Prepared full(problem);
    double ratio = opts.min_ratio > 0.0 ? opts.min_ratio : default_min_ratio(problem);
    res.lambda_grid = make_grid(lambda_max_prepared(full, opts.solver), opts.n_lambda, ratio);
    const Index L = res.lambda_grid.size();

    MatrixXd fold_loss = MatrixXd::Zero(K, L);
    VectorXd fold_w = VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i)
            (res.fold_assignment[static_cast<size_t>(i)] == k ? test : train).push_back(i);
        GlmProblem tp = subset_rows(problem, train);
        double wtrain = tp.weights.sum();
        double wtest = 0.0;
        for (Index i : test) wtest += problem.weights(i);
        fold_w(k) = wtest;
        if (!(wtrain > 0.0)) throw InvalidProblem("fold " + std::to_string(k) + " has no training weight");
        Prepared P(tp);
        LassoFit prev;
        for (Index l = 0; l < L; ++l) {
            LassoFit f = solve_from(P, res.lambda_grid(l), l ? &prev : nullptr, opts.solver);
            double s = 0.0;
            for (Index i : test) {
                if (problem.weights(i) == 0.0) continue;
                double eta = f.intercept + problem.design.row(i).dot(f.coefficients) +
                             (problem.offset.size() ? problem.offset(i) : 0.0);
                s += problem.weights(i) * pointwise_measure(problem.loss, opts.measure, problem.response(i), eta);
            }
            fold_loss(k, l) = s;
            prev = std::move(f);
        }
    }

    const double W = fold_w.sum();
    res.cv_mean.resize(L);
    res.cv_se.resize(L);
    for (Index l = 0; l < L; ++l) {
        double pooled = 0.0;
        for (int k = 0; k < K; ++k) pooled += fold_loss(k, l);
        pooled /= W;
        double ss = 0.0;
        for (int k = 0; k < K; ++k) {
            if (fold_w(k) <= 0.0) continue;
            double e = fold_loss(k, l) / fold_w(k) - pooled;
            ss += fold_w(k) * e * e;
        }
        res.cv_mean(l) = pooled;
        res.cv_se(l) = std::sqrt(ss / W / (K - 1));
    }

    // Strict comparison keeps the earliest (largest) lambda on ties.
    Index best = 0;
    for (Index l = 1; l < L; ++l)
        if (res.cv_mean(l) < res.cv_mean(best)) best = l;
    res.index_min = best;
    res.lambda_min = res.lambda_grid(best);

    LassoFit prev;
    for (Index l = 0; l <= best; ++l) {
        LassoFit f = solve_from(full, res.lambda_grid(l), l ? &prev : nullptr, opts.solver);
        prev = std::move(f);
    }
    res.fit_at_min = std::move(prev);
    return res;
}

CvResult cv_select(const GlmProblem& problem, int n_folds, std::uint64_t seed, CvMeasure measure) {
    CvOptions o;
    o.n_folds = n_folds;
    o.seed = seed;
    o.measure = measure;
    return cv_select(problem, o);
}

}  // namespace drcal
