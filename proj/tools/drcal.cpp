// drcal: Monte Carlo runs and single-dataset fits.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "drcal/errors.hpp"
#include "drcal/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kExcessFailures = 3;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int run_sim(drcal::RunConfig cfg, const std::string& estimators) {
    cfg.estimators = split_list(estimators);
    cfg.validate();
    drcal::RunResult res = drcal::run_replications(cfg);
    for (const auto& f : res.failures) std::cerr << "failed " << f << '\n';
    drcal::emit_outputs(res.rows, res.qq, cfg.out_dir, &cfg);
    std::cout << drcal::format_summary_csv(res.rows);
    if (res.excess_failures) {
        std::cerr << "more than 20% of replicates failed for at least one estimator\n";
        return kExcessFailures;
    }
    return kOk;
}

int run_fit(const std::string& family_id, const std::string& input, const std::string& estimator,
            drcal::TwoStepConfig cfg, const std::string& out) {
    drcal::Family fam = drcal::parse_family(family_id);
    drcal::Dataset d = drcal::load_csv(input, fam);
    drcal::DrFit fit = drcal::fit_dataset(d, fam, estimator, cfg);
    std::string json = drcal::fit_json(fit, fam, d.p());
    if (out.empty() || out == "-") {
        std::cout << json;
    } else {
        std::ofstream f(out, std::ios::binary | std::ios::trunc);
        if (!f) throw drcal::IoError("cannot open " + out + " for writing");
        f << json;
        if (!f) throw drcal::IoError("failed writing " + out);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized calibrated estimation for doubly robust inference"};
    app.require_subcommand(1);

    drcal::RunConfig sim;
    std::string estimators = "db,initial,two_step";
    std::string setting = "C1";
    auto* s = app.add_subcommand("sim", "Run seeded Monte Carlo replications of a simulation setting");
    s->add_option("--setting", setting, "Setting id C1..C9")->capture_default_str();
    s->add_option("--n", sim.n, "Sample size")->capture_default_str();
    s->add_option("--p", sim.p, "Number of covariates")->capture_default_str();
    s->add_option("--reps", sim.reps, "Replications")->capture_default_str();
    s->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    s->add_option("--estimators", estimators, "Comma-separated subset of db,initial,two_step")->capture_default_str();
    s->add_option("--folds", sim.n_folds, "Cross-validation folds")->capture_default_str();
    s->add_option("--level", sim.level, "Confidence level")->capture_default_str();
    s->add_option("--threads", sim.threads, "Worker threads (0 = all cores, capped by DRCAL_THREADS)");
    s->add_flag("--alt-odds-ratio", sim.alt_odds_ratio, "Odds-ratio settings with beta2 = -0.25 and swapped terms");
    s->add_option("--noise-variance", sim.noise_variance, "Gaussian outcome noise variance for C1-C3")
        ->capture_default_str();
    s->add_option("--out", sim.out_dir, "Output directory")->required();

    std::string family = "pl", input, out, estimator = "two_step";
    drcal::TwoStepConfig tc;
    auto* f = app.add_subcommand("fit", "Fit an estimator on a CSV dataset with columns y,z,x1..xp");
    f->add_option("--family", family, "pl, pll, plogit, marmean or marmean-logit")->capture_default_str();
    f->add_option("--input", input, "Input CSV")->required();
    f->add_option("--estimator", estimator, "two_step, initial or db")->capture_default_str();
    f->add_option("--seed", tc.seed, "Seed for cross-validation folds")->capture_default_str();
    f->add_option("--folds", tc.n_folds, "Cross-validation folds")->capture_default_str();
    f->add_option("--level", tc.level, "Confidence level")->capture_default_str();
    f->add_option("--out", out, "Output JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*s) {
            sim.setting = setting;
            return run_sim(sim, estimators);
        }
        return run_fit(family, input, estimator, tc, out);
    } catch (const drcal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const drcal::ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfigError;
    } catch (const drcal::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
