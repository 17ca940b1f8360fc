#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semcom/config.hpp"
#include "semcom/learner.hpp"

namespace semcom {

struct RunMetrics {
    std::vector<IterationMetrics> training;
    std::vector<EvalMetrics> evaluations;
};

/// Trains the configured algorithm for run.iterations with periodic
/// frozen-policy evaluations; writes train_metrics.csv, eval_metrics.csv and
/// checkpoint.json under out_dir. Deterministic given the config.
RunMetrics run_training(const ExperimentConfig& cfg, const std::string& out_dir);

/// Resumes from a checkpoint up to cfg.run.iterations; metrics cover the
/// resumed iterations only.
RunMetrics resume_training(const std::string& checkpoint_path, long iterations,
                           int eval_interval, int eval_episodes, const std::string& out_dir);

/// Frozen-policy evaluation of a checkpoint. Throws ConfigError when the
/// checkpoint's dimensions do not match the config.
EvalMetrics run_evaluation(const std::string& checkpoint_path, const ExperimentConfig& cfg,
                           int episodes);

struct SweepCell {
    std::string axis;
    double value = 0.0;
    std::string algorithm;
    std::uint64_t seed = 0;
    std::string status = "ok"; // or "failed: <reason>"
    double final_reward = 0.0;
    std::optional<long> plateau_iter;
    EvalMetrics eval;
};

/// Trains and evaluates one cell per (axis value, algorithm, seed) with
/// aligned seeds; per-cell failures are recorded and the sweep continues.
std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg_template, const std::string& axis,
                                 const std::vector<double>& values,
                                 const std::vector<std::string>& algorithms,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::string& out_dir);

// --- metrics persistence (CSV, %.17g doubles, documented column order) ---

extern const char* const kTrainMetricsHeader;
extern const char* const kEvalMetricsHeader;
extern const char* const kSweepHeader;

void write_metrics(const RunMetrics& metrics, const std::string& dir);
RunMetrics read_metrics(const std::string& dir);
void write_sweep_table(const std::vector<SweepCell>& table, const std::string& path);
std::vector<SweepCell> read_sweep_table(const std::string& path);

// --- plots (standalone SVG line charts) ---

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series);

/// reward-vs-iteration chart, plus latency-vs-axis when a sweep table is
/// present (latency-vs-iteration otherwise).
void emit_plots(const RunMetrics& metrics, const std::string& dir);
void emit_sweep_plot(const std::vector<SweepCell>& table, const std::string& path);

/// Earliest iteration whose smoothed reward changes by no more than rel_tol
/// (relative) over the next `span` iterations; smoothing is a trailing mean
/// of `window` iterations.
std::optional<long> plateau_iteration(const std::vector<double>& rewards, int window = 20,
                                      int span = 50, double rel_tol = 0.02);

}  // namespace semcom
