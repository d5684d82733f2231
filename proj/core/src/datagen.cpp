#include "drcal/datagen.hpp"

#include <cmath>
#include <random>

#include "drcal/errors.hpp"

namespace drcal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const double kExposureBase[5] = {-0.25, 0.5, 0.75, 1.0, 1.25};
const double kOddsCoef[4] = {-0.125, 0.125, 0.25, 0.375};

double h_nonlinear(const VectorXd& x) {
    return -0.25 + 0.25 * x(0) + 0.8 * x(1) + expit(x(2));
}

double sparse_dot(const VectorXd& x) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += kOddsCoef[j] * x(j);
    return s;
}

double checked_exp(double u) {
    if (u > 700.0) throw NumericOverflow("odds-ratio cell exponent " + std::to_string(u) + " overflows");
    return std::exp(u);
}

}  // namespace

SettingId parse_setting(const std::string& id) {
    static const char* names[] = {"C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9"};
    for (int k = 0; k < 9; ++k)
        if (id == names[k] || (id.size() == 2 && id[0] == 'c' && id[1] == names[k][1]))
            return static_cast<SettingId>(k);
    throw ConfigError("unknown setting '" + id + "' (expected C1..C9)");
}

std::string to_string(SettingId id) {
    return "C" + std::to_string(static_cast<int>(id) + 1);
}

double theta_star(SettingId id) {
    return static_cast<int>(id) <= static_cast<int>(SettingId::C3) ? 3.0 : 2.0;
}

Family family_for(SettingId id) {
    int k = static_cast<int>(id);
    if (k <= 2) return Family::partially_linear();
    if (k <= 5) return Family::partially_loglinear();
    return Family::partially_logistic();
}

int min_p(SettingId id) {
    switch (id) {
        case SettingId::C1:
        case SettingId::C3:
        case SettingId::C4:
        case SettingId::C6:
            return 5;
        default:
            return 4;
    }
}

Setting Setting::make(SettingId id, Index n, Index p, bool alt_odds_ratio) {
    Setting s{id, drcal::theta_star(id), n, p, alt_odds_ratio};
    s.validate();
    return s;
}

void Setting::validate() const {
    if (p < min_p(id)) throw ConfigError(to_string(id) + " needs p >= " + std::to_string(min_p(id)));
    if (n < 1) throw ConfigError("n must be positive");
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) throw ConfigError("noise variance must be positive");
}

VectorXd class_mean(SettingId id, Index p) {
    VectorXd mu = VectorXd::Zero(p);
    switch (id) {
        case SettingId::C2:
        case SettingId::C5:
            for (int j = 0; j < 4 && j < p; ++j) mu(j) = kExposureBase[j] / 2.0;
            break;
        default:
            for (int j = 0; j < 5 && j < p; ++j) mu(j) = kExposureBase[j] / 2.0;
            break;
    }
    return mu;
}

LinearLogit c3_exposure_logit(Index p) {
    LinearLogit out;
    out.beta1 = VectorXd::Zero(p);
    for (int j = 0; j < 5 && j < p; ++j) out.beta1(j) = kExposureBase[j];
    out.beta0 = -0.4296875;
    return out;
}

LinearLogit discriminant_logit_linear(const VectorXd& mu0, const VectorXd& mu1, const MatrixXd& sigma, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidProblem("q must lie in (0, 1)");
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw LinearSolveError("covariance is not positive definite");
    VectorXd s1 = llt.solve(mu1), s0 = llt.solve(mu0);
    LinearLogit out;
    out.beta1 = s1 - s0;
    out.beta0 = -0.5 * mu1.dot(s1) + 0.5 * mu0.dot(s0) + std::log(q / (1.0 - q));
    return out;
}

QuadraticLogit discriminant_logit_quadratic(const VectorXd& mu0, const VectorXd& mu1, const MatrixXd& sigma0,
                                            const MatrixXd& sigma1, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidProblem("q must lie in (0, 1)");
    Eigen::LLT<MatrixXd> l0(sigma0), l1(sigma1);
    if (l0.info() != Eigen::Success || l1.info() != Eigen::Success)
        throw LinearSolveError("covariance is not positive definite");
    const Index p = sigma0.rows();
    MatrixXd i0 = l0.solve(MatrixXd::Identity(p, p));
    MatrixXd i1 = l1.solve(MatrixXd::Identity(p, p));
    double logdet0 = 2.0 * l0.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double logdet1 = 2.0 * l1.matrixL().toDenseMatrix().diagonal().array().log().sum();
    QuadraticLogit out;
    out.beta1 = i1 * mu1 - i0 * mu0;
    out.omega = 0.5 * (i0 - i1);
    out.beta0 = -0.5 * mu1.dot(i1 * mu1) + 0.5 * mu0.dot(i0 * mu0) + std::log(q / (1.0 - q)) +
                0.5 * (logdet0 - logdet1);
    return out;
}

CellProbs odds_ratio_cell_probs(double th, double b1, double b2, double h1, double h2) {
    double e10 = checked_exp(b1 + h1);
    double e01 = checked_exp(b2 + h2);
    double e11 = checked_exp(th + b1 + b2 + h1 + h2);
    double tot = 1.0 + e10 + e01 + e11;
    CellProbs c;
    c.p[0][0] = 1.0 / tot;
    c.p[1][0] = e10 / tot;
    c.p[0][1] = e01 / tot;
    c.p[1][1] = e11 / tot;
    return c;
}

CellProbs odds_ratio_cell_probs(const VectorXd& x, double th, double b1, double b2,
                                const std::function<double(const VectorXd&)>& h1,
                                const std::function<double(const VectorXd&)>& h2) {
    double a = h1(x), b = h2(x);
    if (!std::isfinite(a) || !std::isfinite(b)) throw InvalidProblem("h1/h2 must be finite");
    return odds_ratio_cell_probs(th, b1, b2, a, b);
}

OddsRatioSpec odds_ratio_spec(const Setting& s) {
    OddsRatioSpec o;
    auto linear = [](const VectorXd& x) { return sparse_dot(x); };
    if (!s.alt_odds_ratio) {
        o.beta2 = 0.0;
        switch (s.id) {
            case SettingId::C7:
                o.beta1 = 0.25;
                o.h1 = linear;
                o.h2 = linear;
                break;
            case SettingId::C8:
                o.beta1 = 0.0;
                o.h1 = h_nonlinear;
                o.h2 = linear;
                break;
            case SettingId::C9:
                o.beta1 = 0.25;
                o.h1 = linear;
                o.h2 = h_nonlinear;
                break;
            default:
                throw ConfigError(to_string(s.id) + " is not an odds-ratio setting");
        }
        return o;
    }
    o.beta1 = 0.25;
    o.beta2 = -0.25;
    o.h1 = linear;
    o.h2 = linear;
    switch (s.id) {
        case SettingId::C7:
            break;
        case SettingId::C8:
            o.h2 = [](const VectorXd& x) { return 0.25 * x(0) + 5.0 * x(1) + expit(x(2)); };
            break;
        case SettingId::C9:
            o.h1 = [](const VectorXd& x) { return 0.25 * x(0) + 0.8 * x(1) + expit(x(2)); };
            break;
        default:
            throw ConfigError(to_string(s.id) + " is not an odds-ratio setting");
    }
    return o;
}

Dataset gen_setting(const Setting& s, const RngStream& stream) {
    s.validate();
    const Index n = s.n, p = s.p;
    std::mt19937_64 eng = stream.engine(static_cast<std::uint64_t>(s.id) + 1);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    Dataset d;
    d.x.resize(n, p);
    d.y.resize(n);
    d.z.resize(n);
    const int k = static_cast<int>(s.id);
    const double th = s.theta_star;

    if (k <= 5) {
        const bool quadratic = s.id == SettingId::C2 || s.id == SettingId::C5;
        const VectorXd mu1 = class_mean(s.id, p);
        const double sd1 = quadratic ? std::sqrt(0.5) : 1.0;
        const double noise_sd = std::sqrt(s.noise_variance);
        const LinearLogit c3 = c3_exposure_logit(p);
        for (Index i = 0; i < n; ++i) {
            if (s.id == SettingId::C3) {
                for (Index j = 0; j < p; ++j) d.x(i, j) = norm(eng);
                d.z(i) = unif(eng) < expit(c3.beta0 + c3.beta1.dot(d.x.row(i).transpose())) ? 1.0 : 0.0;
            } else {
                const bool treated = coin(eng);
                d.z(i) = treated ? 1.0 : 0.0;
                for (Index j = 0; j < p; ++j) {
                    double e = norm(eng);
                    d.x(i, j) = treated ? mu1(j) + sd1 * e : e;
                }
            }
            auto x = d.x.row(i);
            switch (s.id) {
                case SettingId::C1:
                case SettingId::C2:
                    d.y(i) = th * d.z(i) + 0.25 * x(0) + 1.5 * x(1) + 1.75 * x(2) + 5.0 * x(3) + noise_sd * norm(eng);
                    break;
                case SettingId::C3:
                    d.y(i) = th * d.z(i) + expit(0.5 * x(0) + x(1)) + 4.0 * (x(2) - 0.75) +
                             2.0 * (x(3) - 1.0) * (x(3) - 1.0) + noise_sd * norm(eng);
                    break;
                case SettingId::C4:
                case SettingId::C5: {
                    double mean = std::exp(th * d.z(i) + 0.1 * x(0) + 0.25 * x(1) + 0.5 * x(2) + 0.75 * x(3));
                    d.y(i) = static_cast<double>(std::poisson_distribution<long long>(mean)(eng));
                    break;
                }
                case SettingId::C6: {
                    double mean = std::exp(th * d.z(i) + x(0) + 0.1 * x(1) * x(1) + 0.2 * x(2) * x(2));
                    d.y(i) = static_cast<double>(std::poisson_distribution<long long>(mean)(eng));
                    break;
                }
                default:
                    break;
            }
        }
        return d;
    }

    // X ~ N(0, Toeplitz(0.5)) through the AR(1) form of its Cholesky factor.
    const OddsRatioSpec o = odds_ratio_spec(s);
    const double innov = std::sqrt(0.75);
    VectorXd x(p);
    for (Index i = 0; i < n; ++i) {
        x(0) = norm(eng);
        for (Index j = 1; j < p; ++j) x(j) = 0.5 * x(j - 1) + innov * norm(eng);
        d.x.row(i) = x.transpose();
        CellProbs c = odds_ratio_cell_probs(x, th, o.beta1, o.beta2, o.h1, o.h2);
        double u = unif(eng);
        int zz = 1, yy = 1;
        if (u < c.p[0][0]) {
            zz = 0; yy = 0;
        } else if (u < c.p[0][0] + c.p[1][0]) {
            zz = 1; yy = 0;
        } else if (u < c.p[0][0] + c.p[1][0] + c.p[0][1]) {
            zz = 0; yy = 1;
        }
        d.z(i) = zz;
        d.y(i) = yy;
    }
    return d;
}

}  // namespace drcal
