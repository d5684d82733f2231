// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: drcal_acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "drcal/datagen.hpp"
#include "drcal/debiased.hpp"
#include "drcal/errors.hpp"
#include "drcal/glm_lasso.hpp"
#include "drcal/harness.hpp"
#include "drcal/model_core.hpp"
#include "drcal/two_step.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace drcal;
using namespace drcal::testing;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Tolerances and budgets.
constexpr double kKktTol = 1e-5;
constexpr double kSoftThresholdTol = 1e-8;
constexpr double kNormalEqTol = 1e-6;
constexpr double kEstimatingEqTol = 1e-10;
constexpr double kBisectionTol = 1e-8;
constexpr double kSharedLambdaTol = 1e-8;
constexpr double kOlsIdentityTol = 1e-8;
constexpr double kGradientRelTol = 1e-5;
constexpr double kInterceptTol = 5e-5 + 1e-12;  // agrees with the printed four decimals
constexpr double kPosteriorSe = 3.0;
constexpr double kOddsRatioTol = 1e-12;

constexpr double kC1BiasAbs = 0.03, kC1SdLow = 0.04, kC1SdHigh = 0.08, kC1CovLow = 0.90, kC1CovHigh = 0.98;
constexpr double kC3DbBiasMin = 0.05, kC3TwoStepBiasAbs = 0.05, kC3CovLow = 0.90;
constexpr double kC6DbBiasMax = -0.01, kC6TwoStepBiasAbs = 0.03, kC6CovLow = 0.90;

constexpr int kMcReps = 200;
constexpr std::uint64_t kMcSeed = 7;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void require(Outcome& o, bool ok, const std::string& what) {
    if (!ok) {
        o.pass = false;
        o.detail += " [violated: " + what + "]";
    }
}

SolverOptions tight(double tol) {
    SolverOptions s;
    s.tol = tol;
    return s;
}

Outcome solver_correctness() {
    Outcome o;
    std::mt19937_64 eng(1001);
    std::uniform_int_distribution<int> nd(60, 200), qd(5, 120);
    std::uniform_real_distribution<double> frac(0.05, 0.9);
    const LossKind losses[] = {LossKind::squared, LossKind::logistic, LossKind::poisson, LossKind::calibration_expit};
    double worst_kkt = 0.0;
    int unconverged = 0;
    for (int rep = 0; rep < 100; ++rep) {
        LossKind loss = losses[rep % 4];
        Index n = nd(eng), q = qd(eng);
        double fr = frac(eng);
        // calibration loss has no minimizer on separable data
        if (loss == LossKind::calibration_expit) {
            q = std::min<Index>(q, n / 4);
            fr = std::max(fr, 0.15);
        }
        GlmProblem pb = random_problem(eng, loss, n, q, rep % 3 == 0);
        LassoFit f = fit_lasso(pb, fr * lambda_max(pb), nullptr, tight(1e-13));
        unconverged += !f.converged;
        double g0 = 0.0;
        worst_kkt = std::max({worst_kkt, fd_kkt_violation(pb, f, &g0), std::abs(g0)});
    }

    const Index n = 120, q = 8;
    MatrixXd g = gaussian_matrix(eng, n, q);
    g.rowwise() -= g.colwise().mean();
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd x = qr.householderQ() * MatrixXd::Identity(n, q) * std::sqrt(static_cast<double>(n));
    VectorXd beta(q);
    beta << 2.0, -1.5, 0.8, 0.3, -0.1, 0.0, 0.05, 1.0;
    VectorXd y = (x * beta).array() + 1.0;
    y += gaussian_vector(eng, n, 0.3);
    GlmProblem orth = make_problem(x, y, LossKind::squared);
    VectorXd ols = x.transpose() * y / static_cast<double>(n);
    double worst_st = 0.0;
    for (double lambda : {0.0, 0.05, 0.2, 0.7, 1.6}) {
        LassoFit f = fit_lasso(orth, lambda, nullptr, tight(1e-14));
        for (Index j = 0; j < q; ++j)
            worst_st = std::max(worst_st, std::abs(f.coefficients(j) - soft_threshold(ols(j), lambda)));
    }

    GlmProblem dense = random_problem(eng, LossKind::squared, 200, 12, true);
    MatrixXd a = with_intercept(dense.design);
    VectorXd oracle = (a.transpose() * dense.weights.asDiagonal() * a)
                          .ldlt()
                          .solve(a.transpose() * dense.weights.asDiagonal() * dense.response);
    LassoFit f0 = fit_lasso(dense, 0.0, nullptr, tight(1e-14));
    double worst_ne = std::abs(f0.intercept - oracle(0));
    for (Index j = 0; j < 12; ++j) worst_ne = std::max(worst_ne, std::abs(f0.coefficients(j) - oracle(j + 1)));

    o.detail = "max KKT violation " + fmt(worst_kkt) + " over 100 problems, soft-threshold error " + fmt(worst_st) +
               ", normal-equation error " + fmt(worst_ne);
    require(o, unconverged == 0, std::to_string(unconverged) + " fits not converged");
    require(o, worst_kkt <= kKktTol, "KKT <= " + fmt(kKktTol));
    require(o, worst_st <= kSoftThresholdTol, "soft threshold <= " + fmt(kSoftThresholdTol));
    require(o, worst_ne <= kNormalEqTol, "normal equations <= " + fmt(kNormalEqTol));
    return o;
}

Outcome theta_solvers() {
    Outcome o;
    std::mt19937_64 eng(1002);
    double worst_tau = 0.0;
    for (Family fam : {Family::partially_linear(), Family::partially_linear(Link::Identity),
                       Family::partially_loglinear(), Family::partially_logistic(), Family::mar_mean(),
                       Family::mar_mean(Link::Expit)}) {
        for (int rep = 0; rep < 10; ++rep) {
            Dataset d = random_dataset(eng, fam, 300, 6);
            NuisanceFit nu{random_coef(eng, 6, 0.2), random_coef(eng, 6, 0.2), Stage::initial};
            worst_tau = std::max(worst_tau, std::abs(mean_tau(fam, d, solve_theta(fam, d, nu), nu)));
        }
    }
    double worst_bis = 0.0;
    int fixtures = 0, mismatched_throw = 0;
    for (Family fam : {Family::partially_loglinear(), Family::partially_logistic()}) {
        for (int ok = 0, rep = 0; ok < 25 && rep < 200; ++rep) {
            Dataset d = random_dataset(eng, fam, 250, 5);
            NuisanceFit nu{random_coef(eng, 5, 0.3), random_coef(eng, 5, 0.3), Stage::initial};
            double closed;
            try {
                closed = solve_theta(fam, d, nu);
            } catch (const NonPositiveRatio&) {
                try {
                    solve_theta_bisection(fam, d, nu);
                    ++mismatched_throw;
                } catch (const DegenerateDenominator&) {
                }
                continue;
            }
            worst_bis = std::max(worst_bis, std::abs(closed - solve_theta_bisection(fam, d, nu)));
            ++ok;
            ++fixtures;
        }
    }
    o.detail = "max |mean tau| " + fmt(worst_tau) + ", closed form vs bisection " + fmt(worst_bis) + " on " +
               std::to_string(fixtures) + " fixtures";
    require(o, worst_tau <= kEstimatingEqTol, "mean tau <= " + fmt(kEstimatingEqTol));
    require(o, fixtures == 50, "50 fixtures");
    require(o, worst_bis <= kBisectionTol, "bisection <= " + fmt(kBisectionTol));
    require(o, mismatched_throw == 0, "bisection found a root where the closed form had none");
    return o;
}

Outcome shared_lambda_identity() {
    Outcome o;
    std::mt19937_64 eng(1003);
    Family fam = Family::partially_linear(Link::Identity);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Dataset d = random_dataset(eng, fam, 200, 12 + rep);
        TwoStepConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(rep);
        cfg.n_lambda = 30;
        cfg.solver.tol = 1e-20;
        cfg.share_lambda_initial = true;
        OutcomeFit joint = fit_joint_outcome(d, fam, cfg);
        InitialEstimate init = initial_estimate(d, fam, cfg, joint);
        CalibratedEstimate cal = calibrated_estimate(d, fam, init, cfg);
        worst = std::max(worst, std::abs(cal.theta2 - debiased_linear(d, cfg, joint).theta));
    }
    o.detail = "max |two_step - db| " + fmt(worst) + " over 20 datasets";
    require(o, worst <= kSharedLambdaTol, "<= " + fmt(kSharedLambdaTol));
    return o;
}

Outcome least_squares_identity() {
    Outcome o;
    std::mt19937_64 eng(1004);
    Family fam = Family::partially_linear(Link::Identity);
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 1000, p = 8;
        Dataset d = random_dataset(eng, fam, n, p);
        MatrixXd a(n, p + 2);
        a.col(0).setOnes();
        a.col(1) = d.z;
        a.rightCols(p) = d.x;
        double ols_z = a.colPivHouseholderQr().solve(d.y)(1);
        auto fit0 = [&](const VectorXd& response) {
            return pack_coefficients(
                fit_lasso(make_problem(d.x, response, LossKind::squared), 0.0, nullptr, tight(1e-24)));
        };
        NuisanceFit nu{fit0(d.y), fit0(d.z), Stage::initial};
        worst = std::max(worst, std::abs(solve_theta(fam, d, nu) - ols_z));
    }
    o.detail = "max |theta - joint OLS| " + fmt(worst) + " over 10 datasets";
    require(o, worst <= kOlsIdentityTol, "<= " + fmt(kOlsIdentityTol));
    return o;
}

Outcome calibration_gradients() {
    Outcome o;
    std::mt19937_64 eng(1005);
    double worst = 0.0;
    int checks = 0;
    for (Family fam : {Family::partially_linear(), Family::partially_linear(Link::Identity),
                       Family::partially_loglinear(), Family::partially_logistic(), Family::mar_mean(),
                       Family::mar_mean(Link::Expit)}) {
        for (int rep = 0; rep < 5; ++rep) {
            const Index p = 5;
            Dataset d = random_dataset(eng, fam, 200, p);
            double theta = 0.3 * std::normal_distribution<double>()(eng);
            VectorXd alpha = random_coef(eng, p, 0.3), gamma = random_coef(eng, p, 0.3);
            NuisanceFit nu{alpha, gamma, Stage::calibrated};
            // the identity-link MarMean exposure loss is fixed, with no alpha dependence to check
            if (!(fam.kind == FamilyKind::MarMean && fam.psi_f != Link::Expit)) {
                GlmProblem l2 = build_l2_problem(fam, d, theta, alpha);
                worst = std::max(worst, max_rel_error(fd_loss_gradient(l2, gamma, d.n()),
                                                      mean_dtau_dalpha(fam, d, theta, nu)));
                ++checks;
            }
            GlmProblem l1 = build_l1_problem(fam, d, theta, gamma);
            worst = std::max(worst, max_rel_error(fd_loss_gradient(l1, alpha, d.n()),
                                                  mean_dtau_dgamma(fam, d, theta, nu)));
            ++checks;
        }
    }
    o.detail = "max relative error " + fmt(worst) + " over " + std::to_string(checks) + " loss/equation pairs";
    require(o, worst <= kGradientRelTol, "<= " + fmt(kGradientRelTol));
    return o;
}

SummaryRow row_for(const RunResult& r, const std::string& est) {
    for (const auto& row : r.rows)
        if (row.estimator == est) return row;
    throw std::runtime_error("missing estimator row " + est);
}

std::string describe(const SummaryRow& r) {
    return r.estimator + " bias " + fmt(r.bias) + " sd " + fmt(r.sd) + " esd " + fmt(r.esd) + " cov95 " + fmt(r.cov95) +
           " (" + std::to_string(r.reps_ok) + " ok, " + std::to_string(r.reps_failed) + " failed)";
}

RunResult monte_carlo(const std::string& setting, Index n, Index p) {
    RunConfig cfg;
    cfg.setting = setting;
    cfg.n = n;
    cfg.p = p;
    cfg.reps = kMcReps;
    cfg.seed = kMcSeed;
    return run_replications(cfg);
}

void common_mc_checks(Outcome& o, const RunResult& r) {
    require(o, !r.excess_failures, "more than 20% failed replicates");
    for (const auto& row : r.rows) require(o, row.cov95 == row.cov95_t, row.estimator + " coverage/t mismatch");
}

Outcome c1_table() {
    Outcome o;
    RunResult r = monte_carlo("C1", 400, 100);
    SummaryRow ts = row_for(r, "two_step");
    o.detail = "C1 n=400 p=100: " + describe(ts);
    common_mc_checks(o, r);
    require(o, std::abs(ts.bias) <= kC1BiasAbs, "|bias| <= " + fmt(kC1BiasAbs));
    require(o, ts.sd >= kC1SdLow && ts.sd <= kC1SdHigh, "sd in [" + fmt(kC1SdLow) + ", " + fmt(kC1SdHigh) + "]");
    require(o, ts.cov95 >= kC1CovLow && ts.cov95 <= kC1CovHigh,
            "cov95 in [" + fmt(kC1CovLow) + ", " + fmt(kC1CovHigh) + "]");
    return o;
}

Outcome c3_contrast() {
    Outcome o;
    RunResult r = monte_carlo("C3", 400, 100);
    SummaryRow db = row_for(r, "db"), ts = row_for(r, "two_step");
    o.detail = "C3 n=400 p=100: " + describe(db) + "; " + describe(ts);
    common_mc_checks(o, r);
    require(o, db.bias >= kC3DbBiasMin, "db bias >= " + fmt(kC3DbBiasMin));
    require(o, std::abs(ts.bias) <= kC3TwoStepBiasAbs, "two_step |bias| <= " + fmt(kC3TwoStepBiasAbs));
    require(o, ts.cov95 >= kC3CovLow, "two_step cov95 >= " + fmt(kC3CovLow));
    return o;
}

Outcome c6_contrast() {
    Outcome o;
    RunResult r = monte_carlo("C6", 600, 100);
    SummaryRow db = row_for(r, "db"), ts = row_for(r, "two_step");
    o.detail = "C6 n=600 p=100: " + describe(db) + "; " + describe(ts);
    common_mc_checks(o, r);
    require(o, db.bias <= kC6DbBiasMax, "db bias <= " + fmt(kC6DbBiasMax));
    require(o, std::abs(ts.bias) <= kC6TwoStepBiasAbs, "two_step |bias| <= " + fmt(kC6TwoStepBiasAbs));
    require(o, ts.cov95 >= kC6CovLow, "two_step cov95 >= " + fmt(kC6CovLow));
    return o;
}

Outcome datagen_oracles() {
    Outcome o;
    double worst_b0 = 0.0;
    for (Index p : {5, 20, 100}) {
        LinearLogit ll = discriminant_logit_linear(VectorXd::Zero(p), class_mean(SettingId::C1, p),
                                                   MatrixXd::Identity(p, p), 0.5);
        worst_b0 = std::max(worst_b0, std::abs(ll.beta0 - -0.4297));
        QuadraticLogit ql = discriminant_logit_quadratic(VectorXd::Zero(p), class_mean(SettingId::C2, p),
                                                         MatrixXd::Identity(p, p), 0.5 * MatrixXd::Identity(p, p), 0.5);
        worst_b0 = std::max(worst_b0, std::abs(ql.beta0 - (-0.4687 + 0.5 * static_cast<double>(p) * std::log(2.0))));
    }

    // Bayes posterior of the mixture recovered by a plain logistic fit.
    const Index n = 1000000;
    double worst_z = 0.0;
    {
        Dataset d = gen_setting(Setting::make(SettingId::C1, n, 5), {2001, 0});
        LinearLogit ll = discriminant_logit_linear(VectorXd::Zero(5), class_mean(SettingId::C1, 5),
                                                   MatrixXd::Identity(5, 5), 0.5);
        LogitFit f = newton_logit(with_intercept(d.x), d.z);
        worst_z = std::max(worst_z, std::abs(f.coef(0) - ll.beta0) / f.se(0));
        for (int j = 0; j < 5; ++j) worst_z = std::max(worst_z, std::abs(f.coef(j + 1) - ll.beta1(j)) / f.se(j + 1));
    }
    {
        Dataset d = gen_setting(Setting::make(SettingId::C2, n, 4), {2002, 0});
        QuadraticLogit ql = discriminant_logit_quadratic(VectorXd::Zero(4), class_mean(SettingId::C2, 4),
                                                         MatrixXd::Identity(4, 4), 0.5 * MatrixXd::Identity(4, 4), 0.5);
        MatrixXd a(n, 6);
        a.leftCols(5) = with_intercept(d.x);
        a.col(5) = d.x.rowwise().squaredNorm();
        LogitFit f = newton_logit(a, d.z);
        worst_z = std::max(worst_z, std::abs(f.coef(0) - ql.beta0) / f.se(0));
        for (int j = 0; j < 4; ++j) worst_z = std::max(worst_z, std::abs(f.coef(j + 1) - ql.beta1(j)) / f.se(j + 1));
        worst_z = std::max(worst_z, std::abs(f.coef(5) - ql.omega(0, 0)) / f.se(5));
    }

    // Odds-ratio cells reproduce the stated conditionals and log odds ratio.
    std::mt19937_64 eng(2003);
    std::normal_distribution<double> norm;
    auto lin = [](const VectorXd& x) { return -0.125 * x(0) + 0.125 * x(1) + 0.25 * x(2) + 0.375 * x(3); };
    auto nl = [](const VectorXd& x) { return -0.25 + 0.25 * x(0) + 0.8 * x(1) + expit(x(2)); };
    double worst_or = 0.0;
    for (SettingId id : {SettingId::C7, SettingId::C8, SettingId::C9}) {
        OddsRatioSpec spec = odds_ratio_spec(Setting::make(id, 10, 6));
        for (int rep = 0; rep < 100; ++rep) {
            VectorXd x(6);
            for (Index j = 0; j < 6; ++j) x(j) = norm(eng);
            CellProbs c = odds_ratio_cell_probs(x, theta_star(id), spec.beta1, spec.beta2, spec.h1, spec.h2);
            double ez = id == SettingId::C8 ? nl(x) : 0.25 + lin(x);
            double ey = id == SettingId::C9 ? nl(x) : lin(x);
            worst_or = std::max({worst_or, std::abs(c.p[1][0] / (c.p[0][0] + c.p[1][0]) - expit(ez)),
                                 std::abs(c.p[0][1] / (c.p[0][0] + c.p[0][1]) - expit(ey)),
                                 std::abs(c.p[1][1] / (c.p[1][0] + c.p[1][1]) - expit(theta_star(id) + ey))});
        }
    }
    o.detail = "intercept error " + fmt(worst_b0) + ", posterior max |z| " + fmt(worst_z) +
               ", odds-ratio conditional error " + fmt(worst_or);
    require(o, worst_b0 <= kInterceptTol, "intercepts to 4 d.p.");
    require(o, worst_z <= kPosteriorSe, "posterior within " + fmt(kPosteriorSe) + " SE");
    require(o, worst_or <= kOddsRatioTol, "odds-ratio conditionals <= " + fmt(kOddsRatioTol));
    return o;
}

std::string read_dir(const std::filesystem::path& dir) {
    std::string all;
    std::set<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir)) names.insert(e.path().filename().string());
    for (const auto& name : names) {
        std::ifstream in(dir / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        all += name + "\n" + ss.str();
    }
    return all;
}

Outcome determinism() {
    Outcome o;
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "drcal_acceptance_determinism";
    fs::remove_all(root);
    int compared = 0;
    bool same = true;
    for (const char* setting : {"C1", "C4", "C7"}) {
        std::string reference;
        for (int threads : {1, 4, 1, 3}) {
            RunConfig cfg;
            cfg.setting = setting;
            cfg.n = 150;
            cfg.p = 20;
            cfg.reps = 10;
            cfg.seed = 99;
            cfg.threads = threads;
            cfg.out_dir = (root / (std::string(setting) + "_" + std::to_string(compared))).string();
            RunResult r = run_replications(cfg);
            emit_outputs(r.rows, r.qq, cfg.out_dir, &cfg);
            std::string bytes = read_dir(cfg.out_dir);
            if (reference.empty())
                reference = bytes;
            else
                same = same && bytes == reference;
            ++compared;
        }
    }
    fs::remove_all(root);
    o.detail = std::to_string(compared) + " runs over C1/C4/C7 with 1, 3 and 4 workers";
    require(o, same, "byte-identical outputs");
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "solver correctness", 60, solver_correctness},
        {2, "closed-form theta solvers", 60, theta_solvers},
        {3, "shared-lambda identity", 60, shared_lambda_identity},
        {4, "least-squares identity", 60, least_squares_identity},
        {5, "calibration gradients", 60, calibration_gradients},
        {6, "C1 desk-scale table", 600, c1_table},
        {7, "C3 misspecification contrast", 900, c3_contrast},
        {8, "C6 log-linear contrast", 1200, c6_contrast},
        {9, "data-generation oracles", 120, datagen_oracles},
        {10, "determinism", 600, determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        require(o, secs <= c.budget_s, "runtime <= " + fmt(c.budget_s) + " s");
        failed += !o.pass;
        std::printf("criterion %2d %s  %s: %s (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
