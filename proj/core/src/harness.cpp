#include "drcal/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "drcal/debiased.hpp"
#include "drcal/errors.hpp"
#include "drcal/inference.hpp"
#include "drcal/rng.hpp"

#ifndef DRCAL_VERSION
#define DRCAL_VERSION "0.0.0"
#endif

namespace drcal {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool known_estimator(const std::string& e) {
    return e == "db" || e == "initial" || e == "two_step";
}

std::string fmt6(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt17(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    for (auto& c : cells) {
        size_t a = c.find_first_not_of(" \t");
        size_t b = c.find_last_not_of(" \t");
        c = a == std::string::npos ? std::string() : c.substr(a, b - a + 1);
    }
    return cells;
}

bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

}  // namespace

Setting RunConfig::make_setting() const {
    Setting s = Setting::make(parse_setting(setting), n, p, alt_odds_ratio);
    s.noise_variance = noise_variance;
    s.validate();
    return s;
}

void RunConfig::validate() const {
    make_setting();
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (n_folds < 2) throw ConfigError("folds must be at least 2");
    if (n < n_folds) throw ConfigError("n must be at least the number of folds");
    if (estimators.empty()) throw ConfigError("no estimators requested");
    for (const auto& e : estimators)
        if (!known_estimator(e)) throw ConfigError("unknown estimator '" + e + "' (expected db, initial, two_step)");
}

int resolve_threads(int requested) {
    int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    int t = requested > 0 ? requested : hw;
    if (const char* env = std::getenv("DRCAL_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) t = std::min(t, cap);
    }
    return std::max(1, t);
}

std::vector<EstimateRecord> run_replicate(const RunConfig& cfg, int replicate) {
    const SettingId id = parse_setting(cfg.setting);
    const Setting s = cfg.make_setting();
    const Family fam = family_for(id);
    std::vector<EstimateRecord> out(cfg.estimators.size());

    TwoStepConfig tc;
    tc.n_folds = cfg.n_folds;
    tc.level = cfg.level;
    tc.seed = stream_key(cfg.seed, static_cast<std::uint64_t>(replicate), 0xcf);

    auto fail_all = [&](const std::string& msg) {
        for (auto& r : out) {
            r.ok = false;
            r.error = msg;
        }
        return out;
    };

    Dataset d;
    OutcomeFit joint;
    try {
        d = gen_setting(s, RngStream{cfg.seed, static_cast<std::uint64_t>(replicate)});
        joint = fit_joint_outcome(d, fam, tc);
    } catch (const std::exception& e) {
        return fail_all(e.what());
    }

    bool need_init = false;
    for (const auto& e : cfg.estimators) need_init |= e != "db";
    InitialEstimate init;
    std::string init_error;
    if (need_init) {
        try {
            init = initial_estimate(d, fam, tc, joint);
        } catch (const std::exception& e) {
            init_error = e.what();
        }
    }
    bool have_cal = false;
    CalibratedEstimate cal;
    std::string cal_error;

    auto record = [](const DrFit& f) {
        EstimateRecord r;
        r.ok = std::isfinite(f.theta) && std::isfinite(f.variance);
        r.theta = f.theta;
        r.variance = f.variance;
        r.ci_low = f.ci_low;
        r.ci_high = f.ci_high;
        if (!r.ok) r.error = "non-finite estimate";
        return r;
    };

    for (size_t k = 0; k < cfg.estimators.size(); ++k) {
        const std::string& est = cfg.estimators[k];
        try {
            if (est == "db") {
                out[k] = record(debiased_fit(d, fam, tc, joint));
            } else if (!init_error.empty()) {
                out[k].error = init_error;
            } else if (est == "initial") {
                out[k] = record(initial_fit(d, fam, init, tc));
            } else {
                if (!have_cal && cal_error.empty()) {
                    try {
                        cal = calibrated_estimate(d, fam, init, tc);
                        have_cal = true;
                    } catch (const std::exception& e) {
                        cal_error = e.what();
                    }
                }
                if (have_cal)
                    out[k] = record(two_step_fit(d, fam, init, cal, tc));
                else
                    out[k].error = cal_error;
            }
        } catch (const std::exception& e) {
            out[k].ok = false;
            out[k].error = e.what();
        }
    }
    return out;
}

SummaryRow summarize(const std::vector<double>& est, const std::vector<double>& var, double theta_star, Index n,
                     double level) {
    if (est.empty()) throw InvalidProblem("summarize: no estimates");
    if (est.size() != var.size()) throw InvalidProblem("summarize: estimates and variances differ in length");
    const double m = static_cast<double>(est.size());
    const double z = critical_value(level);
    double mean = 0.0, mv = 0.0;
    for (size_t i = 0; i < est.size(); ++i) {
        mean += est[i];
        mv += var[i];
    }
    mean /= m;
    mv /= m;
    double ss = 0.0;
    int cov_ci = 0, cov_t = 0;
    for (size_t i = 0; i < est.size(); ++i) {
        ss += (est[i] - mean) * (est[i] - mean);
        IntervalEstimate ci = wald_interval(est[i], var[i], n, level);
        cov_ci += covers(ci, theta_star);
        if (var[i] > 0.0)
            cov_t += std::abs(t_statistic(est[i], theta_star, var[i], n)) <= z;
        else
            cov_t += est[i] == theta_star;
    }
    SummaryRow r;
    r.n = n;
    r.bias = mean - theta_star;
    r.sd = est.size() > 1 ? std::sqrt(ss / (m - 1.0)) : kNaN;
    r.esd = std::sqrt(mv / static_cast<double>(n));
    r.cov95 = cov_ci / m;
    r.cov95_t = cov_t / m;
    r.reps_ok = static_cast<int>(est.size());
    return r;
}

QqRecord qq_record(const std::string& estimator, std::vector<double> t) {
    std::sort(t.begin(), t.end());
    QqRecord q;
    q.estimator = estimator;
    const size_t m = t.size();
    q.normal_q.resize(m);
    for (size_t i = 0; i < m; ++i)
        q.normal_q[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(m));
    q.t = std::move(t);
    return q;
}

RunResult run_replications(const RunConfig& cfg) {
    cfg.validate();
    const SettingId id = parse_setting(cfg.setting);
    const double th = theta_star(id);
    const int reps = cfg.reps;
    const size_t E = cfg.estimators.size();

    std::vector<std::vector<EstimateRecord>> by_rep(static_cast<size_t>(reps));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) by_rep[static_cast<size_t>(r)] = run_replicate(cfg, r);
    };
    const int T = std::min(resolve_threads(cfg.threads), reps);
    if (T <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < T; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunResult res;
    res.records.assign(E, std::vector<EstimateRecord>(static_cast<size_t>(reps)));
    for (int r = 0; r < reps; ++r)
        for (size_t k = 0; k < E; ++k) res.records[k][static_cast<size_t>(r)] = by_rep[static_cast<size_t>(r)][k];

    for (size_t k = 0; k < E; ++k) {
        std::vector<double> est, var, tstats;
        int failed = 0;
        for (int r = 0; r < reps; ++r) {
            const EstimateRecord& rec = res.records[k][static_cast<size_t>(r)];
            if (!rec.ok) {
                ++failed;
                res.failures.push_back("replicate " + std::to_string(r) + " " + cfg.estimators[k] + ": " + rec.error);
                continue;
            }
            est.push_back(rec.theta);
            var.push_back(rec.variance);
            if (rec.variance > 0.0) tstats.push_back(t_statistic(rec.theta, th, rec.variance, cfg.n));
        }
        SummaryRow row;
        if (!est.empty()) {
            row = summarize(est, var, th, cfg.n, cfg.level);
        } else {
            row.bias = row.sd = row.esd = row.cov95 = row.cov95_t = kNaN;
        }
        row.setting = to_string(id);
        row.n = cfg.n;
        row.p = cfg.p;
        row.estimator = cfg.estimators[k];
        row.reps_failed = failed;
        res.rows.push_back(row);
        if (!tstats.empty()) res.qq.push_back(qq_record(cfg.estimators[k], std::move(tstats)));
        if (failed > 0.2 * reps) res.excess_failures = true;
    }
    return res;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "setting,n,p,estimator,bias,sd,esd,cov95,reps_ok,reps_failed\n";
    for (const auto& r : rows)
        os << r.setting << ',' << r.n << ',' << r.p << ',' << r.estimator << ',' << fmt6(r.bias) << ',' << fmt6(r.sd)
           << ',' << fmt6(r.esd) << ',' << fmt6(r.cov95) << ',' << r.reps_ok << ',' << r.reps_failed << '\n';
    return os.str();
}

std::string run_meta_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["software"] = "drcal";
    j["version"] = DRCAL_VERSION;
    j["setting"] = cfg.setting;
    j["n"] = cfg.n;
    j["p"] = cfg.p;
    j["reps"] = cfg.reps;
    j["seed"] = cfg.seed;
    j["estimators"] = cfg.estimators;
    j["folds"] = cfg.n_folds;
    j["level"] = cfg.level;
    j["alt_odds_ratio"] = cfg.alt_odds_ratio;
    j["noise_variance"] = cfg.noise_variance;
    j["theta_star"] = theta_star(parse_setting(cfg.setting));
    return j.dump(2) + "\n";
}

void emit_outputs(const std::vector<SummaryRow>& rows, const std::vector<QqRecord>& qq, const std::string& out_dir,
                  const RunConfig* cfg) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    const fs::path dir(out_dir);
    write_file(dir / "summary.csv", format_summary_csv(rows));
    for (const auto& q : qq) {
        std::ostringstream os;
        os << "normal_q,t\n";
        for (size_t i = 0; i < q.t.size(); ++i) os << fmt17(q.normal_q[i]) << ',' << fmt17(q.t[i]) << '\n';
        write_file(dir / ("qq_" + q.estimator + ".csv"), os.str());
    }
    if (cfg) write_file(dir / "run_meta.json", run_meta_json(*cfg));
}

Dataset load_csv(const std::string& path, const Family& family) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
    std::vector<std::string> header = split_csv(line);

    int col_y = -1, col_z = -1;
    std::map<int, int> xcols;
    for (size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h == "y") {
            col_y = static_cast<int>(c);
        } else if (h == "z") {
            col_z = static_cast<int>(c);
        } else if (h.size() > 1 && h[0] == 'x') {
            int k = 0;
            auto [ptr, ec] = std::from_chars(h.data() + 1, h.data() + h.size(), k);
            if (ec != std::errc() || ptr != h.data() + h.size() || k < 1)
                throw ValidationError(path + ": unrecognized column '" + h + "'");
            xcols[k] = static_cast<int>(c);
        } else {
            throw ValidationError(path + ": unrecognized column '" + h + "'");
        }
    }
    if (col_y < 0) throw ValidationError(path + ": missing column y");
    if (col_z < 0) throw ValidationError(path + ": missing column z");
    if (xcols.empty()) throw ValidationError(path + ": no covariate columns x1..xp");
    const int p = static_cast<int>(xcols.size());
    for (int k = 1; k <= p; ++k)
        if (!xcols.count(k)) throw ValidationError(path + ": missing column x" + std::to_string(k));

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells = split_csv(line);
        if (cells.size() != header.size())
            throw ValidationError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                  " fields, expected " + std::to_string(header.size()));
        std::vector<double> vals(cells.size());
        for (size_t c = 0; c < cells.size(); ++c) {
            const std::string& s = cells[c];
            if (is_missing(s)) {
                vals[c] = kNaN;
                continue;
            }
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size())
                throw ValidationError(path + ": row " + std::to_string(rows.size() + 1) + ", column " + header[c] +
                                      ": '" + s + "' is not a number");
            vals[c] = v;
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ValidationError(path + ": no data rows");

    Dataset d;
    const Index n = static_cast<Index>(rows.size());
    d.y.resize(n);
    d.z.resize(n);
    d.x.resize(n, p);
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<size_t>(i)];
        const std::string where = path + ": row " + std::to_string(i + 1);
        d.z(i) = r[static_cast<size_t>(col_z)];
        if (std::isnan(d.z(i))) throw ValidationError(where + ", column z: missing value");
        d.y(i) = r[static_cast<size_t>(col_y)];
        if (std::isnan(d.y(i)) && !(family.kind == FamilyKind::MarMean && d.z(i) == 0.0))
            throw ValidationError(where + ", column y: missing value");
        for (int k = 1; k <= p; ++k) {
            double v = r[static_cast<size_t>(xcols[k])];
            if (std::isnan(v)) throw ValidationError(where + ", column x" + std::to_string(k) + ": missing value");
            d.x(i, k - 1) = v;
        }
    }
    try {
        validate_dataset(d, family);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return d;
}

void write_csv(const std::string& path, const Dataset& d) {
    std::ostringstream os;
    os << "y,z";
    for (Index j = 0; j < d.p(); ++j) os << ",x" << (j + 1);
    os << '\n';
    for (Index i = 0; i < d.n(); ++i) {
        os << fmt17(d.y(i)) << ',' << fmt17(d.z(i));
        for (Index j = 0; j < d.p(); ++j) os << ',' << fmt17(d.x(i, j));
        os << '\n';
    }
    write_file(path, os.str());
}

DrFit fit_dataset(const Dataset& data, const Family& family, const std::string& estimator, const TwoStepConfig& cfg) {
    if (!known_estimator(estimator)) throw ConfigError("unknown estimator '" + estimator + "'");
    validate_dataset(data, family);
    if (estimator == "two_step") return run_two_step(data, family, cfg);
    OutcomeFit joint = fit_joint_outcome(data, family, cfg);
    if (estimator == "db") return debiased_fit(data, family, cfg, joint);
    return initial_fit(data, family, initial_estimate(data, family, cfg, joint), cfg);
}

std::string fit_json(const DrFit& fit, const Family& family, Index p) {
    nlohmann::ordered_json j;
    j["family"] = to_string(family.kind);
    j["method"] = to_string(fit.method);
    j["n"] = fit.n;
    j["p"] = p;
    j["theta"] = fit.theta;
    j["variance"] = fit.variance;
    j["std_error"] = std::sqrt(fit.variance / static_cast<double>(fit.n));
    j["level"] = fit.level;
    j["ci"] = {fit.ci_low, fit.ci_high};
    j["theta0"] = fit.theta0 ? nlohmann::ordered_json(*fit.theta0) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json lam = nlohmann::ordered_json::object();
    for (const auto& [k, v] : fit.lambdas) lam[k] = v;
    j["lambdas"] = lam;
    auto nnz = [](const VectorXd& c) {
        return c.size() > 1 ? static_cast<long>((c.tail(c.size() - 1).array() != 0.0).count()) : 0L;
    };
    j["nonzero"] = {{"alpha", nnz(fit.nuisance.alpha)}, {"gamma", nnz(fit.nuisance.gamma)}};
    return j.dump(2) + "\n";
}

}  // namespace drcal
