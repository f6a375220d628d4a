#include "stabcp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

namespace stabcp {

namespace {

// fixed stream tags: one per independent randomness consumer of a repetition
constexpr std::uint64_t kStreamSgd = 101;
constexpr std::uint64_t kStreamMlpInit = 102;
constexpr std::uint64_t kStreamBagging = 103;
constexpr std::uint64_t kStreamData = 104;
constexpr std::uint64_t kStreamSplit = 105;
constexpr std::uint64_t kStreamHoldout = 106;

}  // namespace

const char* trainer_name(TrainerKind k) {
    switch (k) {
        case TrainerKind::Rlm: return "rlm";
        case TrainerKind::Sgd: return "sgd";
        case TrainerKind::Mlp: return "mlp";
        case TrainerKind::Bagging: return "bagging";
        case TrainerKind::KernelRlm: return "kernel-rlm";
        case TrainerKind::KernelSgd: return "kernel-sgd";
    }
    return "?";
}

TrainerKind parse_trainer(const std::string& name) {
    if (name == "rlm") return TrainerKind::Rlm;
    if (name == "sgd") return TrainerKind::Sgd;
    if (name == "mlp") return TrainerKind::Mlp;
    if (name == "bagging") return TrainerKind::Bagging;
    if (name == "kernel-rlm") return TrainerKind::KernelRlm;
    if (name == "kernel-sgd") return TrainerKind::KernelSgd;
    throw std::invalid_argument("unknown trainer '" + name + "'");
}

const char* cp_method_name(CpMethod m) {
    switch (m) {
        case CpMethod::Oracle: return "oracle";
        case CpMethod::Full: return "full";
        case CpMethod::Split: return "split";
        case CpMethod::RoStab: return "ro-stab";
        case CpMethod::LooStab: return "loo-stab";
        case CpMethod::MmSplit: return "mm-split";
    }
    return "?";
}

CpMethod parse_cp_method(const std::string& name) {
    if (name == "oracle") return CpMethod::Oracle;
    if (name == "full") return CpMethod::Full;
    if (name == "split") return CpMethod::Split;
    if (name == "ro-stab") return CpMethod::RoStab;
    if (name == "loo-stab") return CpMethod::LooStab;
    if (name == "mm-split") return CpMethod::MmSplit;
    throw std::invalid_argument("unknown method '" + name + "'");
}

const char* screening_method_name(ScreeningMethod m) {
    switch (m) {
        case ScreeningMethod::CfBh: return "cfbh";
        case ScreeningMethod::RoCfBh: return "ro-cfbh";
        case ScreeningMethod::LooCfBh: return "loo-cfbh";
    }
    return "?";
}

ScreeningMethod parse_screening_method(const std::string& name) {
    if (name == "cfbh") return ScreeningMethod::CfBh;
    if (name == "ro-cfbh") return ScreeningMethod::RoCfBh;
    if (name == "loo-cfbh") return ScreeningMethod::LooCfBh;
    throw std::invalid_argument("unknown screening method '" + name + "'");
}

std::uint64_t repetition_seed(std::uint64_t master_seed, int repetition) {
    return derive_seed(master_seed, static_cast<std::uint64_t>(repetition));
}

std::unique_ptr<Trainer> make_trainer(const ExperimentConfig& cfg, std::uint64_t rep_seed) {
    switch (cfg.trainer) {
        case TrainerKind::Rlm:
            return std::make_unique<RlmTrainer>(cfg.epsilon, cfg.rlm);
        case TrainerKind::Sgd: {
            SgdConfig sc = cfg.sgd;
            sc.permutation_seed = derive_seed(rep_seed, kStreamSgd);
            return std::make_unique<SgdTrainer>(cfg.epsilon, sc);
        }
        case TrainerKind::Mlp: {
            SgdConfig sc = cfg.sgd;
            sc.permutation_seed = derive_seed(rep_seed, kStreamSgd);
            return std::make_unique<MlpSgdTrainer>(cfg.hidden, cfg.epsilon, sc,
                                                   derive_seed(rep_seed, kStreamMlpInit));
        }
        case TrainerKind::Bagging: {
            BaggingConfig bc = cfg.bagging;
            bc.seed = derive_seed(rep_seed, kStreamBagging);
            return std::make_unique<BaggingTrainer>(bc);
        }
        case TrainerKind::KernelRlm:
            return std::make_unique<KernelRlmTrainer>(cfg.kernel, cfg.epsilon, cfg.rlm);
        case TrainerKind::KernelSgd: {
            SgdConfig sc = cfg.sgd;
            sc.permutation_seed = derive_seed(rep_seed, kStreamSgd);
            return std::make_unique<KernelSgdTrainer>(cfg.kernel, cfg.epsilon, sc);
        }
    }
    throw DataError("make_trainer: unknown trainer kind");
}

void parallel_for(int count, int parallelism, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    const int workers = std::max(1, std::min(parallelism, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::atomic<bool> abort{false};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!abort.load(std::memory_order_relaxed)) {
                const int i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= count) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    abort.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct CoverLen {
    double coverage = 0.0;
    double mean_length = 0.0;
};

CoverLen coverage_and_length(const std::vector<IntervalUnion>& sets, const Eigen::VectorXd& test_y) {
    CoverLen r;
    const double m = static_cast<double>(sets.size());
    for (std::size_t j = 0; j < sets.size(); ++j) {
        if (sets[j].contains(test_y(static_cast<Eigen::Index>(j)))) r.coverage += 1.0;
        r.mean_length += sets[j].total_length();
    }
    r.coverage /= m;
    r.mean_length /= m;
    return r;
}

double median_of(const Eigen::VectorXd& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

Eigen::VectorXd resolve_thresholds(const std::string& rule, const Eigen::VectorXd& train_y,
                                   Eigen::Index m) {
    if (rule == "zero" || rule.empty()) return Eigen::VectorXd::Zero(m);
    if (rule == "median") return Eigen::VectorXd::Constant(m, median_of(train_y));
    char* end = nullptr;
    const double v = std::strtod(rule.c_str(), &end);
    if (end != rule.c_str() + rule.size() || !std::isfinite(v))
        throw DataError("thresholds rule must be 'zero', 'median', or a number; got '" + rule + "'");
    return Eigen::VectorXd::Constant(m, v);
}

[[noreturn]] void rethrow_with_rep(int rep, std::uint64_t seed) {
    const std::string tag =
        "repetition " + std::to_string(rep) + " (seed " + std::to_string(seed) + "): ";
    try {
        throw;
    } catch (const DataError& e) {
        throw DataError(tag + e.what());
    } catch (const NumericError& e) {
        throw NumericError(tag + e.what());
    } catch (const std::exception& e) {
        throw NumericError(tag + e.what());
    }
}

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt_mean_sd(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", mean, sd);
    return buf;
}

bool is_screen_rows(const std::vector<MetricsRow>& rows) {
    return !rows.empty() && rows.front().q.has_value();
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    const bool screen = is_screen_rows(rows);
    if (screen) {
        out << "repetition,method,q,fdp,power,wall_time_s,fit_count\n";
        for (const auto& r : rows) {
            out << r.repetition << ',' << r.method << ',' << fmt(r.q.value_or(0.0)) << ','
                << (r.fdp ? fmt(*r.fdp) : std::string()) << ','
                << (r.power ? fmt(*r.power) : std::string()) << ',' << fmt(r.wall_time_s) << ','
                << r.fit_count << '\n';
        }
    } else {
        out << "repetition,method,coverage,mean_length,wall_time_s,fit_count\n";
        for (const auto& r : rows) {
            out << r.repetition << ',' << r.method << ',' << fmt(r.coverage) << ','
                << fmt(r.mean_length) << ',' << fmt(r.wall_time_s) << ',' << r.fit_count << '\n';
        }
    }
}

void write_plot_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    const bool screen = is_screen_rows(rows);
    out << (screen ? "repetition,method,q,metric,value\n" : "repetition,method,metric,value\n");
    for (const auto& r : rows) {
        if (screen) {
            const std::string head =
                std::to_string(r.repetition) + "," + r.method + "," + fmt(r.q.value_or(0.0));
            if (r.fdp) out << head << ",fdp," << fmt(*r.fdp) << '\n';
            if (r.power) out << head << ",power," << fmt(*r.power) << '\n';
        } else {
            out << r.repetition << ',' << r.method << ",coverage," << fmt(r.coverage) << '\n';
            out << r.repetition << ',' << r.method << ",mean_length," << fmt(r.mean_length) << '\n';
        }
    }
}

void write_summary_csv(const std::string& path, const std::vector<SummaryEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "method,q,metric,mean,sd\n";
    for (const auto& e : entries) {
        out << e.method << ',' << (e.q ? fmt(*e.q) : std::string()) << ',' << e.metric << ','
            << fmt(e.mean) << ',' << fmt(e.sd) << '\n';
    }
}

std::string summary_table(const std::vector<SummaryEntry>& entries) {
    // group rows back by (method, q) preserving order
    struct Line {
        std::string method;
        std::optional<double> q;
        std::vector<std::pair<std::string, std::string>> cells;
    };
    std::vector<Line> lines;
    for (const auto& e : entries) {
        Line* line = nullptr;
        for (auto& l : lines)
            if (l.method == e.method && l.q == e.q) line = &l;
        if (!line) {
            lines.push_back({e.method, e.q, {}});
            line = &lines.back();
        }
        if (e.metric == "fit_count") {
            line->cells.emplace_back(e.metric, fmt(e.mean, "%.10g"));
        } else {
            line->cells.emplace_back(e.metric, fmt_mean_sd(e.mean, e.sd));
        }
    }

    std::vector<std::string> columns;
    for (const auto& l : lines)
        for (const auto& [name, _] : l.cells)
            if (std::find(columns.begin(), columns.end(), name) == columns.end())
                columns.push_back(name);

    const bool has_q = !lines.empty() && lines.front().q.has_value();
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"method"};
    if (has_q) header.push_back("q");
    header.insert(header.end(), columns.begin(), columns.end());
    grid.push_back(header);
    for (const auto& l : lines) {
        std::vector<std::string> row{l.method};
        if (has_q) row.push_back(fmt(l.q.value_or(0.0), "%.3g"));
        for (const auto& c : columns) {
            std::string cell;
            for (const auto& [name, text] : l.cells)
                if (name == c) cell = text;
            row.push_back(cell);
        }
        grid.push_back(row);
    }

    std::vector<std::size_t> widths(grid.front().size(), 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    std::string out;
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out += std::string(widths[c] - row[c].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

std::string kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Polynomial: return "polynomial";
    }
    return "?";
}

// The echo doubles as provenance and as a replay file: one section named
// after the subcommand, keys identical to its flags, so
//   stabcp --config config.echo <mode>
// reruns the exact configuration (flags still override).
void write_config_echo(const std::string& path, const ExperimentConfig& cfg, const std::string& mode) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "# replay with: stabcp --config <this file> " << mode << '\n';
    out << '[' << mode << "]\n";
    out << "repetitions = " << cfg.repetitions << '\n';
    out << "master-seed = " << cfg.master_seed << '\n';
    out << "parallelism = " << cfg.parallelism << '\n';
    out << "out = " << cfg.out_dir << '\n';
    if (mode == "bench") {
        out << "csv = " << cfg.csv_path << '\n';
        out << "response = " << cfg.response_column << '\n';
        out << "m = " << cfg.holdout_m << '\n';
    } else if (!cfg.csv_path.empty()) {  // screen on CSV data
        out << "csv = " << cfg.csv_path << '\n';
        out << "response = " << cfg.response_column << '\n';
        out << "holdout-m = " << cfg.holdout_m << '\n';
    } else {
        out << "n = " << cfg.synth.n << '\n';
        out << "m = " << cfg.synth.m << '\n';
        out << "d = " << cfg.synth.d << '\n';
        out << "rho = " << fmt(cfg.synth.rho_ar) << '\n';
        out << "model = " << (cfg.synth.model == SignalModel::Linear ? "linear" : "nonlinear") << '\n';
        out << "noise-sd = " << fmt(cfg.synth.noise_sd) << '\n';
    }
    out << "trainer = " << trainer_name(cfg.trainer) << '\n';
    out << "epsilon = " << fmt(cfg.epsilon) << '\n';
    switch (cfg.trainer) {
        case TrainerKind::Rlm:
        case TrainerKind::KernelRlm:
            out << "omega = " << fmt(cfg.rlm.omega) << '\n';
            out << "learning-rate = " << fmt(cfg.rlm.learning_rate) << '\n';
            out << "grad-tol = " << fmt(cfg.rlm.grad_tol) << '\n';
            out << "max-iters = " << cfg.rlm.max_iters << '\n';
            break;
        case TrainerKind::Sgd:
        case TrainerKind::KernelSgd:
        case TrainerKind::Mlp:
            out << "epochs = " << cfg.sgd.epochs << '\n';
            out << "learning-rate = " << fmt(cfg.sgd.learning_rate) << '\n';
            break;
        case TrainerKind::Bagging:
            out << "bags = " << cfg.bagging.bags << '\n';
            out << "bag-size = " << cfg.bagging.bag_size << '\n';
            out << "max-depth = " << cfg.bagging.max_depth << '\n';
            if (cfg.bagging.delta) out << "delta = " << fmt(*cfg.bagging.delta) << '\n';
            break;
    }
    if (cfg.trainer == TrainerKind::Mlp) {
        out << "hidden = ";
        for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
            out << (i ? "," : "") << cfg.hidden[i];
        out << '\n';
    }
    if (cfg.trainer == TrainerKind::KernelRlm || cfg.trainer == TrainerKind::KernelSgd) {
        out << "kernel = " << kernel_name(cfg.kernel.kind) << '\n';
        out << "sigma = " << fmt(cfg.kernel.sigma) << '\n';
        out << "offset = " << fmt(cfg.kernel.offset) << '\n';
        out << "degree = " << cfg.kernel.degree << '\n';
    }
    if (mode == "screen") {
        out << "methods = ";
        for (std::size_t i = 0; i < cfg.screen_methods.size(); ++i)
            out << (i ? "," : "") << screening_method_name(cfg.screen_methods[i]);
        out << '\n';
        out << "q = ";
        for (std::size_t i = 0; i < cfg.q_levels.size(); ++i) out << (i ? "," : "") << fmt(cfg.q_levels[i]);
        out << '\n';
        out << "thresholds = " << cfg.thresholds << '\n';
        out << "split-fraction = " << fmt(cfg.split_fraction) << '\n';
    } else {
        out << "methods = ";
        for (std::size_t i = 0; i < cfg.methods.size(); ++i)
            out << (i ? "," : "") << cp_method_name(cfg.methods[i]);
        out << '\n';
        out << "alpha = " << fmt(cfg.alpha) << '\n';
        out << "split-fraction = " << fmt(cfg.split_fraction) << '\n';
        out << "n-splits = " << cfg.n_splits << '\n';
        out << "grid-points = " << cfg.grid_points << '\n';
    }
}

RunResult finalize(const ExperimentConfig& cfg, const std::string& mode,
                   std::vector<MetricsRow> rows) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    RunResult res;
    res.rows = std::move(rows);
    res.metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
    res.summary_path = (fs::path(cfg.out_dir) / "summary.csv").string();
    res.plot_path = (fs::path(cfg.out_dir) / "plot_data.csv").string();
    res.config_echo_path = (fs::path(cfg.out_dir) / "config.echo").string();
    write_metrics_csv(res.metrics_path, res.rows);
    const auto entries = summarize(res.rows);
    write_summary_csv(res.summary_path, entries);
    write_plot_csv(res.plot_path, res.rows);
    write_config_echo(res.config_echo_path, cfg, mode);
    res.summary_text = summary_table(entries);
    return res;
}

void check_common(const ExperimentConfig& cfg) {
    if (cfg.repetitions < 1) throw DataError("config: repetitions must be at least 1");
    if (cfg.parallelism < 1) throw DataError("config: parallelism must be at least 1");
}

// Shared core of simulate/bench: data per repetition comes from `make_data`.
std::vector<MetricsRow> interval_rows(
    const ExperimentConfig& cfg,
    const std::function<void(int, std::uint64_t, Eigen::MatrixXd&, Eigen::VectorXd&, Eigen::MatrixXd&,
                             Eigen::VectorXd&)>& make_data) {
    if (cfg.methods.empty()) throw DataError("config: no methods selected");
    const int reps = cfg.repetitions;
    const std::size_t per = cfg.methods.size();
    std::vector<MetricsRow> rows(static_cast<std::size_t>(reps) * per);

    parallel_for(reps, cfg.parallelism, [&](int r) {
        const std::uint64_t rs = repetition_seed(cfg.master_seed, r);
        try {
            Eigen::MatrixXd X, test_X;
            Eigen::VectorXd y, test_y;
            make_data(r, rs, X, y, test_X, test_y);

            const auto trainer = make_trainer(cfg, rs);
            FitCounter counter;
            trainer->set_counter(&counter);

            for (std::size_t mi = 0; mi < per; ++mi) {
                CpConfig mc;
                mc.alpha = cfg.alpha;
                mc.method = cfg.methods[mi];
                mc.split_fraction = cfg.split_fraction;
                mc.n_splits = cfg.n_splits;
                mc.split_seed = derive_seed(rs, kStreamSplit);
                if (mc.method == CpMethod::Full) mc.grid = default_grid(y, cfg.grid_points);

                const std::int64_t fits_before = counter.count();
                const auto t0 = std::chrono::steady_clock::now();
                const auto sets = run_conformal(*trainer, X, y, test_X, mc, ScoreKind::AbsoluteResidual,
                                                &test_y);
                const auto t1 = std::chrono::steady_clock::now();

                MetricsRow& row = rows[static_cast<std::size_t>(r) * per + mi];
                row.repetition = r;
                row.method = cp_method_name(mc.method);
                const CoverLen cl = coverage_and_length(sets, test_y);
                row.coverage = cl.coverage;
                row.mean_length = cl.mean_length;
                row.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
                row.fit_count = counter.count() - fits_before;
            }
        } catch (...) {
            rethrow_with_rep(r, rs);
        }
    });
    return rows;
}

}  // namespace

std::vector<SummaryEntry> summarize(const std::vector<MetricsRow>& rows) {
    struct Group {
        std::string method;
        std::optional<double> q;
        std::vector<const MetricsRow*> rows;
    };
    std::vector<Group> groups;
    for (const auto& r : rows) {
        Group* g = nullptr;
        for (auto& cand : groups)
            if (cand.method == r.method && cand.q == r.q) g = &cand;
        if (!g) {
            groups.push_back({r.method, r.q, {}});
            g = &groups.back();
        }
        g->rows.push_back(&r);
    }

    auto mean_sd = [](const std::vector<double>& v) -> std::pair<double, double> {
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (const double x : v) mean += x;
        mean /= n;
        if (v.size() < 2) return {mean, 0.0};
        double ss = 0.0;
        for (const double x : v) ss += (x - mean) * (x - mean);
        return {mean, std::sqrt(ss / (n - 1.0))};
    };

    std::vector<SummaryEntry> out;
    for (const auto& g : groups) {
        const bool screen = g.q.has_value();
        std::vector<std::pair<std::string, std::vector<double>>> metrics;
        if (screen) {
            std::vector<double> fdp, power;
            for (const auto* r : g.rows) {
                if (r->fdp) fdp.push_back(*r->fdp);
                if (r->power) power.push_back(*r->power);
            }
            if (!fdp.empty()) metrics.emplace_back("fdp", std::move(fdp));
            if (!power.empty()) metrics.emplace_back("power", std::move(power));
        } else {
            std::vector<double> cov, len;
            for (const auto* r : g.rows) {
                cov.push_back(r->coverage);
                len.push_back(r->mean_length);
            }
            metrics.emplace_back("coverage", std::move(cov));
            metrics.emplace_back("mean_length", std::move(len));
        }
        std::vector<double> wall, fits;
        for (const auto* r : g.rows) {
            wall.push_back(r->wall_time_s);
            fits.push_back(static_cast<double>(r->fit_count));
        }
        metrics.emplace_back("wall_time_s", std::move(wall));
        metrics.emplace_back("fit_count", std::move(fits));

        for (auto& [name, values] : metrics) {
            const auto [mean, sd] = mean_sd(values);
            out.push_back({g.method, g.q, name, mean, sd});
        }
    }
    return out;
}

RunResult run_simulate(const ExperimentConfig& cfg) {
    check_common(cfg);
    auto rows = interval_rows(cfg, [&](int, std::uint64_t rs, Eigen::MatrixXd& X, Eigen::VectorXd& y,
                                       Eigen::MatrixXd& test_X, Eigen::VectorXd& test_y) {
        SyntheticSpec spec = cfg.synth;
        spec.seed = derive_seed(rs, kStreamData);
        auto [train, test] = gen_synthetic(spec);
        X = std::move(train.X);
        y = std::move(*train.y);
        test_X = std::move(test.X);
        test_y = std::move(*test.y);
    });
    return finalize(cfg, "simulate", std::move(rows));
}

RunResult run_bench(const ExperimentConfig& cfg) {
    check_common(cfg);
    if (cfg.csv_path.empty()) throw DataError("bench mode needs a CSV data source");
    const Dataset full = zscore_normalize(load_csv(cfg.csv_path, cfg.response_column));
    if (!full.y) throw DataError("bench mode needs a response column");

    auto rows = interval_rows(cfg, [&](int, std::uint64_t rs, Eigen::MatrixXd& X, Eigen::VectorXd& y,
                                       Eigen::MatrixXd& test_X, Eigen::VectorXd& test_y) {
        auto [train, test] = holdout_split(full, cfg.holdout_m, derive_seed(rs, kStreamHoldout));
        X = std::move(train.X);
        y = std::move(*train.y);
        test_X = std::move(test.X);
        test_y = std::move(*test.y);
    });
    return finalize(cfg, "bench", std::move(rows));
}

RunResult run_screen(const ExperimentConfig& cfg) {
    check_common(cfg);
    if (cfg.screen_methods.empty()) throw DataError("config: no screening methods selected");
    if (cfg.q_levels.empty()) throw DataError("config: no q levels given");

    std::optional<Dataset> csv_full;
    if (!cfg.csv_path.empty()) {
        csv_full = zscore_normalize(load_csv(cfg.csv_path, cfg.response_column));
        if (!csv_full->y) throw DataError("screen mode needs a response column");
    }

    const int reps = cfg.repetitions;
    const std::size_t per = cfg.screen_methods.size() * cfg.q_levels.size();
    std::vector<MetricsRow> rows(static_cast<std::size_t>(reps) * per);

    parallel_for(reps, cfg.parallelism, [&](int r) {
        const std::uint64_t rs = repetition_seed(cfg.master_seed, r);
        try {
            Eigen::MatrixXd X, test_X;
            Eigen::VectorXd y, test_y;
            if (csv_full) {
                auto [train, test] = holdout_split(*csv_full, cfg.holdout_m, derive_seed(rs, kStreamHoldout));
                X = std::move(train.X);
                y = std::move(*train.y);
                test_X = std::move(test.X);
                test_y = std::move(*test.y);
            } else {
                SyntheticSpec spec = cfg.synth;
                spec.seed = derive_seed(rs, kStreamData);
                auto [train, test] = gen_synthetic(spec);
                X = std::move(train.X);
                y = std::move(*train.y);
                test_X = std::move(test.X);
                test_y = std::move(*test.y);
            }

            const auto trainer = make_trainer(cfg, rs);
            FitCounter counter;
            trainer->set_counter(&counter);

            ScreeningConfig sc;
            sc.thresholds = resolve_thresholds(cfg.thresholds, y, test_X.rows());
            sc.score_kind = ScoreKind::SignedResidual;
            sc.split_fraction = cfg.split_fraction;
            sc.split_seed = derive_seed(rs, kStreamSplit);

            std::size_t slot = 0;
            for (const double q : cfg.q_levels) {
                sc.q = q;
                for (const ScreeningMethod method : cfg.screen_methods) {
                    const std::int64_t fits_before = counter.count();
                    const auto t0 = std::chrono::steady_clock::now();
                    const ScreeningResult sr = run_screening(*trainer, X, y, test_X, sc, method, &test_y);
                    const auto t1 = std::chrono::steady_clock::now();

                    MetricsRow& row = rows[static_cast<std::size_t>(r) * per + slot++];
                    row.repetition = r;
                    row.method = screening_method_name(method);
                    row.q = q;
                    row.fdp = sr.fdp;
                    row.power = sr.power;
                    row.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
                    row.fit_count = counter.count() - fits_before;
                }
            }
        } catch (...) {
            rethrow_with_rep(r, rs);
        }
    });
    return finalize(cfg, "screen", std::move(rows));
}

}  // namespace stabcp
