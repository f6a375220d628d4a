// Benchmark harness for stability-corrected conformal prediction:
//   stabcp simulate  — synthetic interval benchmark
//   stabcp bench     — CSV-backed interval benchmark with seeded holdouts
//   stabcp screen    — FDR-controlled screening benchmark
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabcp/errors.hpp"
#include "stabcp/harness.hpp"

namespace {

struct CliState {
    stabcp::ExperimentConfig cfg;
    std::string trainer = "rlm";
    std::string model = "linear";
    std::string kernel = "rbf";
    std::vector<std::string> methods;
    std::vector<std::string> screen_methods;
    std::vector<int> hidden;
    double learning_rate = -1.0;  // routed to the active trainer when set
    double delta = -1.0;          // < 0 means "derandomized bagging bound"
};

void add_common_options(CLI::App* cmd, CliState& st) {
    auto& cfg = st.cfg;
    cmd->add_option("--repetitions", cfg.repetitions, "number of seeded repetitions");
    cmd->add_option("--master-seed", cfg.master_seed, "seed all repetition streams derive from");
    cmd->add_option("--parallelism", cfg.parallelism, "worker threads for repetitions");
    cmd->add_option("--out", cfg.out_dir, "output directory for metrics/summary/plot files");

    cmd->add_option("--trainer", st.trainer, "rlm | sgd | mlp | bagging | kernel-rlm | kernel-sgd");
    cmd->add_option("--epsilon", cfg.epsilon, "robust-loss knee");
    cmd->add_option("--omega", cfg.rlm.omega, "penalty weight (rlm trainers)");
    cmd->add_option("--learning-rate", st.learning_rate, "step size of the active trainer");
    cmd->add_option("--grad-tol", cfg.rlm.grad_tol, "gradient norm stopping threshold (rlm)");
    cmd->add_option("--max-iters", cfg.rlm.max_iters, "iteration cap (rlm)");
    cmd->add_option("--epochs", cfg.sgd.epochs, "passes over the data (sgd trainers)");
    cmd->add_option("--bags", cfg.bagging.bags, "ensemble size (bagging)");
    cmd->add_option("--bag-size", cfg.bagging.bag_size, "resample size, 0 = n (bagging)");
    cmd->add_option("--max-depth", cfg.bagging.max_depth, "tree depth cap (bagging)");
    cmd->add_option("--delta", st.delta, "failure level for the finite-ensemble bagging bound");
    cmd->add_option("--kernel", st.kernel, "linear | rbf | polynomial");
    cmd->add_option("--sigma", cfg.kernel.sigma, "rbf bandwidth");
    cmd->add_option("--offset", cfg.kernel.offset, "polynomial kernel offset");
    cmd->add_option("--degree", cfg.kernel.degree, "polynomial kernel degree");
    cmd->add_option("--hidden", st.hidden, "hidden layer widths (mlp)")->delimiter(',');
}

void add_synth_options(CLI::App* cmd, CliState& st) {
    auto& cfg = st.cfg;
    cmd->add_option("--n", cfg.synth.n, "training rows");
    cmd->add_option("--m", cfg.synth.m, "test rows");
    cmd->add_option("--d", cfg.synth.d, "feature dimension");
    cmd->add_option("--rho", cfg.synth.rho_ar, "AR(1) feature correlation");
    cmd->add_option("--model", st.model, "linear | nonlinear signal");
    cmd->add_option("--noise-sd", cfg.synth.noise_sd, "response noise scale");
}

void add_interval_options(CLI::App* cmd, CliState& st) {
    auto& cfg = st.cfg;
    cmd->add_option("--methods", st.methods,
                    "loo-stab | ro-stab | split | full | oracle | mm-split (comma-separated)")
        ->delimiter(',');
    cmd->add_option("--alpha", cfg.alpha, "target miscoverage");
    cmd->add_option("--split-fraction", cfg.split_fraction, "train share of sample splits");
    cmd->add_option("--n-splits", cfg.n_splits, "splits merged by mm-split");
    cmd->add_option("--grid-points", cfg.grid_points, "response grid size for full refits");
}

void resolve(CliState& st, bool screening) {
    auto& cfg = st.cfg;
    cfg.trainer = stabcp::parse_trainer(st.trainer);

    if (st.model == "linear")
        cfg.synth.model = stabcp::SignalModel::Linear;
    else if (st.model == "nonlinear")
        cfg.synth.model = stabcp::SignalModel::Nonlinear;
    else
        throw std::invalid_argument("unknown model '" + st.model + "'");

    if (st.kernel == "linear")
        cfg.kernel.kind = stabcp::KernelKind::Linear;
    else if (st.kernel == "rbf")
        cfg.kernel.kind = stabcp::KernelKind::Rbf;
    else if (st.kernel == "polynomial")
        cfg.kernel.kind = stabcp::KernelKind::Polynomial;
    else
        throw std::invalid_argument("unknown kernel '" + st.kernel + "'");

    if (st.learning_rate > 0.0) {
        if (cfg.trainer == stabcp::TrainerKind::Rlm || cfg.trainer == stabcp::TrainerKind::KernelRlm)
            cfg.rlm.learning_rate = st.learning_rate;
        else
            cfg.sgd.learning_rate = st.learning_rate;
    } else if (st.learning_rate != -1.0) {
        throw std::invalid_argument("--learning-rate must be positive");
    }

    if (st.delta >= 0.0) {
        if (st.delta <= 0.0 || st.delta >= 1.0)
            throw std::invalid_argument("--delta must lie strictly between 0 and 1");
        cfg.bagging.delta = st.delta;
    }

    if (!st.hidden.empty()) {
        cfg.hidden.clear();
        for (const int h : st.hidden) {
            if (h < 1) throw std::invalid_argument("--hidden widths must be positive");
            cfg.hidden.push_back(h);
        }
    }

    if (screening) {
        if (!st.screen_methods.empty()) {
            cfg.screen_methods.clear();
            for (const auto& name : st.screen_methods)
                cfg.screen_methods.push_back(stabcp::parse_screening_method(name));
        }
    } else if (!st.methods.empty()) {
        cfg.methods.clear();
        for (const auto& name : st.methods) cfg.methods.push_back(stabcp::parse_cp_method(name));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability-corrected conformal prediction benchmarks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; command-line flags take precedence")
        ->configurable(false);

    CliState st;

    CLI::App* simulate = app.add_subcommand("simulate", "synthetic interval benchmark");
    add_common_options(simulate, st);
    add_synth_options(simulate, st);
    add_interval_options(simulate, st);

    CLI::App* bench = app.add_subcommand("bench", "CSV interval benchmark with seeded holdouts");
    add_common_options(bench, st);
    add_interval_options(bench, st);
    bench->add_option("--csv", st.cfg.csv_path, "input CSV (header row, numeric columns)")->required();
    bench->add_option("--response", st.cfg.response_column, "response column name");
    bench->add_option("--m", st.cfg.holdout_m, "held-out test rows per repetition");

    CLI::App* screen = app.add_subcommand("screen", "FDR-controlled screening benchmark");
    add_common_options(screen, st);
    add_synth_options(screen, st);
    screen->add_option("--csv", st.cfg.csv_path, "optional CSV source instead of synthetic data");
    screen->add_option("--response", st.cfg.response_column, "response column name (CSV source)");
    screen->add_option("--holdout-m", st.cfg.holdout_m, "held-out test rows (CSV source)");
    screen->add_option("--methods", st.screen_methods, "cfbh | ro-cfbh | loo-cfbh (comma-separated)")
        ->delimiter(',');
    screen->add_option("--q", st.cfg.q_levels, "target FDR levels (comma-separated)")->delimiter(',');
    screen->add_option("--thresholds", st.cfg.thresholds, "cutoff rule: zero | median | <number>");
    screen->add_option("--split-fraction", st.cfg.split_fraction, "train share for the split baseline");

    try {
        app.parse(argc, argv);
        const bool screening = screen->parsed();
        resolve(st, screening);

        stabcp::RunResult result;
        if (simulate->parsed()) {
            result = stabcp::run_simulate(st.cfg);
        } else if (bench->parsed()) {
            result = stabcp::run_bench(st.cfg);
        } else {
            result = stabcp::run_screen(st.cfg);
        }
        std::cout << result.summary_text;
        std::cout << "wrote " << result.metrics_path << ", " << result.summary_path << ", "
                  << result.plot_path << ", " << result.config_echo_path << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const stabcp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const stabcp::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
}
