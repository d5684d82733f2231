#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "drcal/datagen.hpp"
#include "drcal/model_core.hpp"
#include "drcal/two_step.hpp"

namespace drcal {

struct RunConfig {
    std::string setting = "C1";
    Eigen::Index n = 400;
    Eigen::Index p = 100;
    int reps = 200;
    std::uint64_t seed = 7;
    std::vector<std::string> estimators = {"db", "initial", "two_step"};
    int n_folds = 5;
    double level = 0.95;
    std::string out_dir;
    int threads = 0;  // 0: DRCAL_THREADS or hardware concurrency
    bool alt_odds_ratio = false;
    double noise_variance = kGaussianNoiseVariance;

    Setting make_setting() const;
    void validate() const;
};

struct SummaryRow {
    std::string setting;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    std::string estimator;
    double bias = 0.0;
    double sd = 0.0;   // NaN when fewer than two replicates
    double esd = 0.0;
    double cov95 = 0.0;
    double cov95_t = 0.0;  // same quantity through |t| <= z
    int reps_ok = 0;
    int reps_failed = 0;
};

struct QqRecord {
    std::string estimator;
    std::vector<double> normal_q;
    std::vector<double> t;  // ascending
};

struct EstimateRecord {
    bool ok = false;
    double theta = 0.0;
    double variance = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::string error;
};

struct RunResult {
    std::vector<SummaryRow> rows;
    std::vector<QqRecord> qq;
    // [estimator][replicate]
    std::vector<std::vector<EstimateRecord>> records;
    std::vector<std::string> failures;
    bool excess_failures = false;
};

int resolve_threads(int requested);

// One replicate: every requested estimator on the same draw.
std::vector<EstimateRecord> run_replicate(const RunConfig& cfg, int replicate);

RunResult run_replications(const RunConfig& cfg);

SummaryRow summarize(const std::vector<double>& estimates, const std::vector<double>& variances, double theta_star,
                     Eigen::Index n, double level);

QqRecord qq_record(const std::string& estimator, std::vector<double> t);

Dataset load_csv(const std::string& path, const Family& family);
void write_csv(const std::string& path, const Dataset& data);

std::string format_summary_csv(const std::vector<SummaryRow>& rows);
std::string run_meta_json(const RunConfig& cfg);
void emit_outputs(const std::vector<SummaryRow>& rows, const std::vector<QqRecord>& qq, const std::string& out_dir,
                  const RunConfig* cfg = nullptr);

// Fits one estimator on a dataset; estimator is db, initial or two_step.
DrFit fit_dataset(const Dataset& data, const Family& family, const std::string& estimator, const TwoStepConfig& cfg);
std::string fit_json(const DrFit& fit, const Family& family, Eigen::Index p);

}  // namespace drcal
