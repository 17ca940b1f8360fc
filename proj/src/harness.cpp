#include "semcom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "semcom/errors.hpp"

namespace semcom {

namespace {

void set_worker_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(std::max(1, n));
#else
    (void)n;
#endif
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

RunMetrics train_loop(Trainer& trainer, long target_iterations, int eval_interval,
                      int eval_episodes) {
    RunMetrics metrics;
    while (trainer.iteration() < target_iterations) {
        metrics.training.push_back(trainer.run_iteration());
        if (trainer.iteration() % eval_interval == 0 || trainer.iteration() == target_iterations)
            metrics.evaluations.push_back(trainer.evaluate(eval_episodes));
    }
    return metrics;
}

}  // namespace

RunMetrics run_training(const ExperimentConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    set_worker_threads(cfg.run.parallel);
    Trainer trainer(cfg.train_setup());
    RunMetrics metrics =
        train_loop(trainer, cfg.run.iterations, cfg.run.eval_interval, cfg.run.eval_episodes);
    write_metrics(metrics, out_dir);
    trainer.save_checkpoint_file(out_dir + "/checkpoint.json");
    return metrics;
}

RunMetrics resume_training(const std::string& checkpoint_path, long iterations, int eval_interval,
                           int eval_episodes, const std::string& out_dir) {
    ensure_dir(out_dir);
    Trainer trainer = Trainer::from_checkpoint_file(checkpoint_path);
    set_worker_threads(trainer.setup().parallel);
    RunMetrics metrics = train_loop(trainer, iterations, eval_interval, eval_episodes);
    write_metrics(metrics, out_dir);
    trainer.save_checkpoint_file(out_dir + "/checkpoint.json");
    return metrics;
}

EvalMetrics run_evaluation(const std::string& checkpoint_path, const ExperimentConfig& cfg,
                           int episodes) {
    if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
    Trainer trainer = Trainer::from_checkpoint_file(checkpoint_path);
    const TrainSetup& s = trainer.setup();
    if (static_cast<int>(s.topo.servers.size()) != cfg.system.num_servers ||
        static_cast<int>(s.topo.users.size()) != cfg.system.num_users ||
        s.env_cfg.num_rbs != cfg.system.num_rbs)
        throw ConfigError("checkpoint dimensions (servers/users/RBs) do not match the config");
    set_worker_threads(cfg.run.parallel);
    return trainer.evaluate(episodes);
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg_template, const std::string& axis,
                                 const std::vector<double>& values,
                                 const std::vector<std::string>& algorithms,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::string& out_dir) {
    if (values.empty()) throw ConfigError("sweep: need at least one axis value");
    if (axis != "users" && axis != "servers")
        throw ConfigError("sweep: axis must be 'users' or 'servers'");
    ensure_dir(out_dir);

    std::vector<SweepCell> table;
    for (double value : values) {
        for (const std::string& algo : algorithms) {
            for (std::uint64_t seed : seeds) {
                SweepCell cell;
                cell.axis = axis;
                cell.value = value;
                cell.algorithm = algo;
                cell.seed = seed;
                try {
                    ExperimentConfig cfg = cfg_template;
                    if (axis == "users")
                        cfg.system.num_users = static_cast<int>(value);
                    else
                        cfg.system.num_servers = static_cast<int>(value);
                    cfg.run.algorithm = algo;
                    cfg.run.seed = seed;
                    std::ostringstream cell_dir;
                    cell_dir << out_dir << "/" << axis << value << "_" << algo << "_s" << seed;
                    RunMetrics metrics = run_training(cfg, cell_dir.str());
                    if (metrics.evaluations.empty())
                        throw RuntimeFailure("sweep cell produced no evaluation");
                    cell.eval = metrics.evaluations.back();
                    std::vector<double> rewards;
                    rewards.reserve(metrics.training.size());
                    for (const auto& row : metrics.training)
                        rewards.push_back(row.mean_episode_reward);
                    if (auto p = plateau_iteration(rewards)) cell.plateau_iter = p;
                    if (!rewards.empty()) cell.final_reward = rewards.back();
                } catch (const std::exception& e) {
                    cell.status = std::string("failed: ") + e.what();
                }
                table.push_back(std::move(cell));
            }
        }
    }
    write_sweep_table(table, out_dir + "/sweep.csv");
    return table;
}

// --- metrics CSV ---

const char* const kTrainMetricsHeader =
    "iteration,total_reward,td_loss,policy_loss,mean_entropy,kl_gap_max,policy_inner_steps,"
    "policy_update_reverted";
const char* const kEvalMetricsHeader =
    "iteration,episodes,avg_latency_s_mean,avg_latency_s_std,reliability,multi_rb_prob,"
    "served_fraction,mean_total_reward";
const char* const kSweepHeader =
    "axis,value,algorithm,seed,status,final_reward,plateau_iteration,avg_latency_s_mean,"
    "avg_latency_s_std,reliability,multi_rb_prob,served_fraction";

void write_metrics(const RunMetrics& metrics, const std::string& dir) {
    ensure_dir(dir);
    {
        std::ofstream out(dir + "/train_metrics.csv");
        if (!out) throw ConfigError("cannot write " + dir + "/train_metrics.csv");
        out << kTrainMetricsHeader << '\n';
        for (const IterationMetrics& m : metrics.training)
            out << m.iteration << ',' << fmt(m.mean_episode_reward) << ',' << fmt(m.td_loss) << ','
                << fmt(m.policy_loss) << ',' << fmt(m.mean_entropy) << ',' << fmt(m.kl_gap_max)
                << ',' << m.policy_inner_steps << ',' << (m.policy_update_reverted ? 1 : 0)
                << '\n';
    }
    {
        std::ofstream out(dir + "/eval_metrics.csv");
        if (!out) throw ConfigError("cannot write " + dir + "/eval_metrics.csv");
        out << kEvalMetricsHeader << '\n';
        for (const EvalMetrics& m : metrics.evaluations)
            out << m.iteration << ',' << m.episodes << ',' << fmt(m.latency_mean_s) << ','
                << fmt(m.latency_std_s) << ',' << fmt(m.reliability) << ','
                << fmt(m.multi_rb_prob) << ',' << fmt(m.served_fraction) << ','
                << fmt(m.mean_total_reward) << '\n';
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": missing header");
    if (line != expected_header) throw ConfigError(path + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace

RunMetrics read_metrics(const std::string& dir) {
    RunMetrics metrics;
    for (const auto& row : read_csv(dir + "/train_metrics.csv", kTrainMetricsHeader)) {
        IterationMetrics m;
        m.iteration = std::stol(row.at(0));
        m.mean_episode_reward = std::stod(row.at(1));
        m.td_loss = std::stod(row.at(2));
        m.policy_loss = std::stod(row.at(3));
        m.mean_entropy = std::stod(row.at(4));
        m.kl_gap_max = std::stod(row.at(5));
        m.policy_inner_steps = std::stoi(row.at(6));
        m.policy_update_reverted = row.at(7) == "1";
        metrics.training.push_back(m);
    }
    for (const auto& row : read_csv(dir + "/eval_metrics.csv", kEvalMetricsHeader)) {
        EvalMetrics m;
        m.iteration = std::stol(row.at(0));
        m.episodes = std::stoi(row.at(1));
        m.latency_mean_s = std::stod(row.at(2));
        m.latency_std_s = std::stod(row.at(3));
        m.reliability = std::stod(row.at(4));
        m.multi_rb_prob = std::stod(row.at(5));
        m.served_fraction = std::stod(row.at(6));
        m.mean_total_reward = std::stod(row.at(7));
        metrics.evaluations.push_back(m);
    }
    return metrics;
}

void write_sweep_table(const std::vector<SweepCell>& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << kSweepHeader << '\n';
    for (const SweepCell& c : table) {
        std::string status = c.status;
        std::replace(status.begin(), status.end(), ',', ';');
        out << c.axis << ',' << fmt(c.value) << ',' << c.algorithm << ',' << c.seed << ','
            << status << ',' << fmt(c.final_reward) << ','
            << (c.plateau_iter ? std::to_string(*c.plateau_iter) : "") << ','
            << fmt(c.eval.latency_mean_s) << ',' << fmt(c.eval.latency_std_s) << ','
            << fmt(c.eval.reliability) << ',' << fmt(c.eval.multi_rb_prob) << ','
            << fmt(c.eval.served_fraction) << '\n';
    }
}

std::vector<SweepCell> read_sweep_table(const std::string& path) {
    std::vector<SweepCell> table;
    for (const auto& row : read_csv(path, kSweepHeader)) {
        SweepCell c;
        c.axis = row.at(0);
        c.value = std::stod(row.at(1));
        c.algorithm = row.at(2);
        c.seed = std::stoull(row.at(3));
        c.status = row.at(4);
        c.final_reward = std::stod(row.at(5));
        if (!row.at(6).empty()) c.plateau_iter = std::stol(row.at(6));
        c.eval.latency_mean_s = std::stod(row.at(7));
        c.eval.latency_std_s = std::stod(row.at(8));
        c.eval.reliability = std::stod(row.at(9));
        c.eval.multi_rb_prob = std::stod(row.at(10));
        c.eval.served_fraction = std::stod(row.at(11));
        table.push_back(std::move(c));
    }
    return table;
}

// --- SVG line charts ---

namespace {

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#17becf"};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series) {
    const double width = 720, height = 480;
    const double ml = 70, mr = 20, mt = 40, mb = 50;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const PlotSeries& s : series)
        for (auto [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plot file " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << xml_escape(title) << "</text>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (mt + height - mb) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
    // tick labels at the corners of the data range
    out << "<text x=\"" << ml << "\" y=\"" << height - mb + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">" << xmin << "</text>\n";
    out << "<text x=\"" << width - mr << "\" y=\"" << height - mb + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">" << xmax << "</text>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << sy(ymin) << "\" font-size=\"10\" "
        << "text-anchor=\"end\">" << ymin << "</text>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << sy(ymax) << "\" font-size=\"10\" "
        << "text-anchor=\"end\">" << ymax << "</text>\n";

    int color = 0;
    double legend_y = mt + 4;
    for (const PlotSeries& s : series) {
        const char* stroke = kSeriesColors[color % 7];
        out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : s.points) out << sx(x) << ',' << sy(y) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << width - mr - 150 << "\" y=\"" << legend_y
            << "\" font-size=\"11\" fill=\"" << stroke << "\">" << xml_escape(s.label)
            << "</text>\n";
        legend_y += 14;
        ++color;
    }
    out << "</svg>\n";
}

void emit_plots(const RunMetrics& metrics, const std::string& dir) {
    ensure_dir(dir);
    PlotSeries reward{"total reward", {}};
    for (const IterationMetrics& m : metrics.training)
        reward.points.emplace_back(static_cast<double>(m.iteration), m.mean_episode_reward);
    write_line_chart(dir + "/reward_vs_iteration.svg", "Training reward", "iteration",
                     "total reward", {reward});

    if (!metrics.evaluations.empty()) {
        PlotSeries latency{"average latency", {}};
        for (const EvalMetrics& m : metrics.evaluations)
            latency.points.emplace_back(static_cast<double>(m.iteration), m.latency_mean_s);
        write_line_chart(dir + "/latency_vs_iteration.svg", "Evaluation latency", "iteration",
                         "average latency (s)", {latency});
    }
}

void emit_sweep_plot(const std::vector<SweepCell>& table, const std::string& path) {
    // mean latency per (algorithm, value) over seeds, one series per algorithm
    std::vector<std::string> algos;
    for (const SweepCell& c : table)
        if (c.status == "ok" && std::find(algos.begin(), algos.end(), c.algorithm) == algos.end())
            algos.push_back(c.algorithm);
    std::string axis = table.empty() ? "value" : table.front().axis;
    std::vector<PlotSeries> series;
    for (const std::string& algo : algos) {
        PlotSeries s{algo, {}};
        std::vector<double> values;
        for (const SweepCell& c : table)
            if (c.status == "ok" && c.algorithm == algo &&
                std::find(values.begin(), values.end(), c.value) == values.end())
                values.push_back(c.value);
        std::sort(values.begin(), values.end());
        for (double v : values) {
            double sum = 0;
            int n = 0;
            for (const SweepCell& c : table)
                if (c.status == "ok" && c.algorithm == algo && c.value == v) {
                    sum += c.eval.latency_mean_s;
                    ++n;
                }
            if (n > 0) s.points.emplace_back(v, sum / n);
        }
        series.push_back(std::move(s));
    }
    write_line_chart(path, "Average latency sweep", axis, "average latency (s)", series);
}

std::optional<long> plateau_iteration(const std::vector<double>& rewards, int window, int span,
                                      double rel_tol) {
    const long n = static_cast<long>(rewards.size());
    if (n < window) return std::nullopt;
    std::vector<double> smoothed(n);
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        acc += rewards[i];
        if (i >= window) acc -= rewards[i - window];
        smoothed[i] = acc / std::min<long>(i + 1, window);
    }
    for (long i = window - 1; i + span < n; ++i) {
        const double ref = smoothed[i];
        const double change = std::fabs(smoothed[i + span] - ref);
        if (change <= rel_tol * std::max(std::fabs(ref), 1e-9)) return i;
    }
    return std::nullopt;
}

}  // namespace semcom
