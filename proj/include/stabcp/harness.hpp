#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabcp/conformal.hpp"
#include "stabcp/data.hpp"
#include "stabcp/screening.hpp"
#include "stabcp/trainers.hpp"

namespace stabcp {

enum class TrainerKind { Rlm, Sgd, Mlp, Bagging, KernelRlm, KernelSgd };

const char* trainer_name(TrainerKind k);
TrainerKind parse_trainer(const std::string& name);

const char* cp_method_name(CpMethod m);
CpMethod parse_cp_method(const std::string& name);

const char* screening_method_name(ScreeningMethod m);
ScreeningMethod parse_screening_method(const std::string& name);

// Everything a benchmark run needs; flags and config files fill this in.
struct ExperimentConfig {
    // data source: synthetic spec, or a CSV with a per-repetition holdout
    SyntheticSpec synth;
    std::string csv_path;
    std::string response_column = "y";
    Eigen::Index holdout_m = 100;

    // interval methods (simulate/bench) and screening methods (screen)
    std::vector<CpMethod> methods = {CpMethod::LooStab, CpMethod::RoStab, CpMethod::Split,
                                     CpMethod::Oracle};
    std::vector<ScreeningMethod> screen_methods = {ScreeningMethod::LooCfBh, ScreeningMethod::RoCfBh,
                                                   ScreeningMethod::CfBh};
    double alpha = 0.1;
    std::vector<double> q_levels = {0.1, 0.2, 0.3};
    // cutoff rule for screening: "zero", "median", or a numeric constant
    std::string thresholds = "zero";

    TrainerKind trainer = TrainerKind::Rlm;
    double epsilon = 1.0;
    RlmConfig rlm;
    SgdConfig sgd;
    BaggingConfig bagging;
    KernelSpec kernel;
    std::vector<Eigen::Index> hidden = {16};

    double split_fraction = 0.7;
    int n_splits = 30;
    Eigen::Index grid_points = 200;

    int repetitions = 100;
    std::uint64_t master_seed = 42;
    int parallelism = 1;
    std::string out_dir = ".";
};

// One output row; q/fdp/power are filled in screen mode only.
struct MetricsRow {
    int repetition = 0;
    std::string method;
    double coverage = 0.0;
    double mean_length = 0.0;
    double wall_time_s = 0.0;
    std::int64_t fit_count = 0;
    std::optional<double> q;
    std::optional<double> fdp;
    std::optional<double> power;
};

struct RunResult {
    std::vector<MetricsRow> rows;
    std::string metrics_path;
    std::string summary_path;
    std::string plot_path;
    std::string config_echo_path;
    std::string summary_text;  // the table printed to stdout
};

// Builds the configured trainer with repetition-specific randomness
// streams (reshuffling order, network init, bag draws).
std::unique_ptr<Trainer> make_trainer(const ExperimentConfig& cfg, std::uint64_t rep_seed);

// Per-repetition seeds, pre-derived so results never depend on
// scheduling.
std::uint64_t repetition_seed(std::uint64_t master_seed, int repetition);

// Runs fn(i) for i in [0, count) on a pool of `parallelism` threads; the
// first exception aborts the run and is rethrown.
void parallel_for(int count, int parallelism, const std::function<void(int)>& fn);

// Synthetic-data interval benchmark: per repetition, fresh data, all
// configured methods on that same data.
RunResult run_simulate(const ExperimentConfig& cfg);

// CSV-backed interval benchmark: normalize once, per repetition a fresh
// seeded holdout of holdout_m rows.
RunResult run_bench(const ExperimentConfig& cfg);

// Screening benchmark over the configured q levels.
RunResult run_screen(const ExperimentConfig& cfg);

// mean/sd aggregation used for summary.csv; exposed for tests.
struct SummaryEntry {
    std::string method;
    std::optional<double> q;
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;
};
std::vector<SummaryEntry> summarize(const std::vector<MetricsRow>& rows);

}  // namespace stabcp
