#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semcom/config.hpp"
#include "semcom/errors.hpp"
#include "semcom/harness.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::istringstream in(csv);
    std::string field;
    while (std::getline(in, field, ',')) values.push_back(std::stod(field));
    return values;
}

std::vector<std::string> parse_names(const std::string& csv) {
    std::vector<std::string> names;
    std::istringstream in(csv);
    std::string field;
    while (std::getline(in, field, ',')) names.push_back(field);
    return names;
}

struct CommonOpts {
    std::string config_path;
    std::int64_t seed = -1;
    std::string algorithm;
    std::string out_dir;
    int parallel = 0;
};

semcom::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
    semcom::ExperimentConfig cfg = opts.config_path.empty()
                                       ? semcom::config_from_json_text("")
                                       : semcom::load_config(opts.config_path);
    if (opts.seed >= 0) cfg.run.seed = static_cast<std::uint64_t>(opts.seed);
    if (!opts.algorithm.empty()) cfg.run.algorithm = opts.algorithm;
    if (!opts.out_dir.empty()) cfg.run.output_dir = opts.out_dir;
    if (opts.parallel > 0) cfg.run.parallel = opts.parallel;
    semcom::algo_from_string(cfg.run.algorithm);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_algo = true) {
    cmd->add_option("-c,--config", opts.config_path, "experiment config (JSON)");
    cmd->add_option("-s,--seed", opts.seed, "override run.seed");
    if (with_algo)
        cmd->add_option("-a,--algo", opts.algorithm,
                        "override run.algorithm (vd-erl | vdn-dqn | iql | random)");
    cmd->add_option("-o,--out-dir", opts.out_dir, "override run.output_dir");
    cmd->add_option("-p,--parallel", opts.parallel, "worker threads (1 = serial mode)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cooperative semantic image transmission simulator"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* gen = app.add_subcommand("gen-scenario", "generate and save a scenario file");
    std::string scenario_out = "scenario.json";
    std::string dataset_out;
    int dataset_images = 0;
    add_common(gen, opts, false);
    gen->add_option("--out", scenario_out, "scenario file to write");
    gen->add_option("--dataset-out", dataset_out, "also write a scene-graph dataset here");
    gen->add_option("--images", dataset_images, "dataset size (defaults to the user count)");

    auto* train = app.add_subcommand("train", "train the configured algorithm");
    std::string resume_path;
    add_common(train, opts);
    train->add_option("--resume", resume_path, "resume from a checkpoint file");

    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint with greedy actions");
    std::string ckpt_path;
    int episodes = 0;
    std::string eval_out;
    add_common(eval, opts, false);
    eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval->add_option("-e,--episodes", episodes, "evaluation episodes (default from config)");
    eval->add_option("--out", eval_out, "append the result row to this CSV");

    auto* sweep = app.add_subcommand("sweep", "train/evaluate across an axis");
    std::string axis = "users";
    std::string values_csv;
    std::string algos_csv = "vd-erl,vdn-dqn,iql,random";
    int sweep_seeds = 5;
    add_common(sweep, opts, false);
    sweep->add_option("--axis", axis, "users | servers")->required();
    sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
    sweep->add_option("--algos", algos_csv, "comma-separated algorithms");
    sweep->add_option("--seeds", sweep_seeds, "number of seeds per cell");

    auto* report = app.add_subcommand("report", "emit SVG charts from metrics files");
    std::string report_dir;
    report->add_option("-d,--dir", report_dir, "directory holding metrics CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            semcom::ExperimentConfig cfg = load_with_overrides(opts);
            auto ts = semcom::rng::stream(cfg.run.seed, "topology");
            semcom::Scenario scenario;
            scenario.topology = semcom::gen_topology(cfg.effective_geometry(), ts);
            scenario.channel_seed = cfg.run.seed;
            if (!dataset_out.empty()) {
                const int count = dataset_images > 0 ? dataset_images : cfg.system.num_users;
                std::vector<semcom::SceneGraph> graphs;
                for (int i = 0; i < count; ++i) {
                    auto gs = semcom::rng::stream(cfg.run.seed, "dataset-image",
                                                  static_cast<std::uint64_t>(i));
                    graphs.push_back(semcom::generate_scene_graph(
                        cfg.generator, "img-" + std::to_string(i), gs));
                }
                semcom::write_dataset_file(dataset_out, graphs);
                scenario.dataset_path = dataset_out;
            }
            semcom::write_scenario_file(scenario_out, scenario);
            std::cout << "wrote " << scenario_out << '\n';
        } else if (train->parsed()) {
            semcom::ExperimentConfig cfg = load_with_overrides(opts);
            semcom::RunMetrics metrics;
            if (resume_path.empty()) {
                metrics = semcom::run_training(cfg, cfg.run.output_dir);
            } else {
                metrics = semcom::resume_training(resume_path, cfg.run.iterations,
                                                  cfg.run.eval_interval, cfg.run.eval_episodes,
                                                  cfg.run.output_dir);
            }
            std::cout << "trained " << metrics.training.size() << " iterations, metrics in "
                      << cfg.run.output_dir << '\n';
            if (!metrics.evaluations.empty()) {
                const auto& last = metrics.evaluations.back();
                std::cout << "final eval: latency " << last.latency_mean_s << " s, reliability "
                          << last.reliability << ", multi-RB " << last.multi_rb_prob << '\n';
            }
        } else if (eval->parsed()) {
            semcom::ExperimentConfig cfg = load_with_overrides(opts);
            const int n = episodes > 0 ? episodes : cfg.run.eval_episodes;
            semcom::EvalMetrics m = semcom::run_evaluation(ckpt_path, cfg, n);
            std::cout << semcom::kEvalMetricsHeader << '\n'
                      << m.iteration << ',' << m.episodes << ',' << m.latency_mean_s << ','
                      << m.latency_std_s << ',' << m.reliability << ',' << m.multi_rb_prob << ','
                      << m.served_fraction << ',' << m.mean_total_reward << '\n';
            if (!eval_out.empty()) {
                semcom::RunMetrics rm;
                rm.evaluations.push_back(m);
                semcom::write_metrics(rm, eval_out);
            }
        } else if (sweep->parsed()) {
            semcom::ExperimentConfig cfg = load_with_overrides(opts);
            std::vector<std::uint64_t> seeds;
            for (int i = 0; i < sweep_seeds; ++i)
                seeds.push_back(cfg.run.seed + static_cast<std::uint64_t>(i));
            const auto table = semcom::run_sweep(cfg, axis, parse_values(values_csv),
                                                 parse_names(algos_csv), seeds,
                                                 cfg.run.output_dir);
            int failed = 0;
            for (const auto& cell : table)
                if (cell.status != "ok") ++failed;
            std::cout << "sweep wrote " << table.size() << " rows (" << failed << " failed) to "
                      << cfg.run.output_dir << "/sweep.csv\n";
        } else if (report->parsed()) {
            semcom::RunMetrics metrics = semcom::read_metrics(report_dir);
            semcom::emit_plots(metrics, report_dir);
            std::error_code ec;
            if (std::filesystem::exists(report_dir + "/sweep.csv", ec)) {
                const auto table = semcom::read_sweep_table(report_dir + "/sweep.csv");
                semcom::emit_sweep_plot(table, report_dir + "/latency_vs_axis.svg");
            }
            std::cout << "charts written to " << report_dir << '\n';
        }
    } catch (const semcom::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
