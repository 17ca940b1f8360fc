#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "semcom/config.hpp"
#include "semcom/errors.hpp"
#include "semcom/harness.hpp"

using namespace semcom;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Small, fast configuration for end-to-end runs.
ExperimentConfig tiny_config() {
    return config_from_json_text(R"({
        "system": {"num_servers": 2, "num_users": 5, "num_rbs": 2},
        "geometry": {"server_ring_radius_m": 100, "area_radius_m": 220, "coverage_radius_m": 250},
        "generator": {"triples_min": 3, "triples_max": 5},
        "embedding": {"dimension": 32},
        "hyper": {"hidden_dims": [16, 16], "episodes_per_iteration": 3, "batch_size": 12,
                   "q_steps_per_iteration": 3, "policy_max_inner_steps": 30,
                   "store_capacity": 128},
        "run": {"iterations": 4, "eval_interval": 2, "eval_episodes": 4, "seed": 3}
    })");
}

}  // namespace

TEST_CASE("empty config yields the reference defaults") {
    const ExperimentConfig cfg = config_from_json_text("");
    CHECK(cfg.system.num_rbs == 8);
    CHECK(cfg.system.rb_bandwidth_hz == 2e6);
    CHECK(cfg.system.num_servers == 5);
    CHECK(cfg.system.num_users == 50);
    CHECK(cfg.system.tx_power_w == 1.0);
    CHECK(cfg.system.noise_psd_dbm_per_hz == -174.0);
    CHECK(cfg.system.eta == 3.0);
    CHECK(cfg.system.rho == -3.0);
    CHECK(cfg.system.reliability_epsilon == 0.9);
    CHECK(cfg.system.xi == 0.5);
    CHECK(cfg.effective_selection_xi() == 0.5);
}

TEST_CASE("noise density converts from dBm/Hz to W/Hz") {
    const ExperimentConfig cfg = config_from_json_text("");
    CHECK(cfg.noise_psd_w_per_hz() == doctest::Approx(3.981071705534986e-21).epsilon(1e-12));
}

TEST_CASE("config validation names the offending field") {
    CHECK_THROWS_WITH_AS(config_from_json_text(R"({"system": {"rb_bandwidth_hz": -2e6}})"),
                         doctest::Contains("rb_bandwidth_hz"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json_text(R"({"system": {"mystery_field": 1}})"),
                         doctest::Contains("mystery_field"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json_text(R"({"unknown_section": {}})"),
                         doctest::Contains("unknown_section"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"system": {"num_rbs": "eight"}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text("not json"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"run": {"algorithm": "dreamer"}})"), ConfigError);
}

TEST_CASE("metrics files round-trip at full printed precision") {
    const auto dir = temp_dir("semcom_metrics_roundtrip");
    RunMetrics metrics;
    IterationMetrics it;
    it.iteration = 3;
    it.mean_episode_reward = 1.0 / 3.0;
    it.td_loss = 2.7182818284590452;
    it.policy_loss = -0.12345678901234567;
    it.mean_entropy = 1.0986122886681098;
    it.kl_gap_max = 1e-300;
    it.policy_inner_steps = 17;
    it.policy_update_reverted = true;
    metrics.training.push_back(it);
    EvalMetrics ev;
    ev.iteration = 3;
    ev.episodes = 100;
    ev.latency_mean_s = 2.853032076139886e-05;
    ev.latency_std_s = 7.0e-07;
    ev.reliability = 0.93;
    ev.multi_rb_prob = 0.015625;
    ev.served_fraction = 5.0 / 7.0;
    ev.mean_total_reward = 23.456789012345678;
    metrics.evaluations.push_back(ev);

    write_metrics(metrics, dir.string());
    const std::string train_text = slurp(dir / "train_metrics.csv");
    CHECK(train_text.substr(0, train_text.find('\n')) == kTrainMetricsHeader);

    const RunMetrics loaded = read_metrics(dir.string());
    REQUIRE(loaded.training.size() == 1);
    REQUIRE(loaded.evaluations.size() == 1);
    CHECK(loaded.training[0].mean_episode_reward == it.mean_episode_reward);
    CHECK(loaded.training[0].td_loss == it.td_loss);
    CHECK(loaded.training[0].policy_loss == it.policy_loss);
    CHECK(loaded.training[0].kl_gap_max == it.kl_gap_max);
    CHECK(loaded.training[0].policy_update_reverted);
    CHECK(loaded.evaluations[0].latency_mean_s == ev.latency_mean_s);
    CHECK(loaded.evaluations[0].served_fraction == ev.served_fraction);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run_training is deterministic and writes byte-identical metrics") {
    const auto dir_a = temp_dir("semcom_run_a");
    const auto dir_b = temp_dir("semcom_run_b");
    const ExperimentConfig cfg = tiny_config();
    run_training(cfg, dir_a.string());
    run_training(cfg, dir_b.string());
    CHECK(slurp(dir_a / "train_metrics.csv") == slurp(dir_b / "train_metrics.csv"));
    CHECK(slurp(dir_a / "eval_metrics.csv") == slurp(dir_b / "eval_metrics.csv"));
    CHECK(slurp(dir_a / "checkpoint.json") == slurp(dir_b / "checkpoint.json"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("zero iterations produce header-only metrics and an initial checkpoint") {
    const auto dir = temp_dir("semcom_run_zero");
    ExperimentConfig cfg = tiny_config();
    cfg.run.iterations = 0;
    const RunMetrics metrics = run_training(cfg, dir.string());
    CHECK(metrics.training.empty());
    CHECK(slurp(dir / "train_metrics.csv") == std::string(kTrainMetricsHeader) + "\n");
    CHECK(std::filesystem::exists(dir / "checkpoint.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint-resume matches the uninterrupted run through the harness") {
    const auto dir_full = temp_dir("semcom_full");
    const auto dir_half = temp_dir("semcom_half");
    const auto dir_rest = temp_dir("semcom_rest");

    ExperimentConfig cfg = tiny_config();
    const RunMetrics full = run_training(cfg, dir_full.string());

    ExperimentConfig half = cfg;
    half.run.iterations = 2;
    run_training(half, dir_half.string());
    const RunMetrics rest =
        resume_training((dir_half / "checkpoint.json").string(), cfg.run.iterations,
                        cfg.run.eval_interval, cfg.run.eval_episodes, dir_rest.string());

    REQUIRE(full.training.size() == 4);
    REQUIRE(rest.training.size() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(rest.training[i].iteration == full.training[i + 2].iteration);
        CHECK(rest.training[i].mean_episode_reward == full.training[i + 2].mean_episode_reward);
        CHECK(rest.training[i].td_loss == full.training[i + 2].td_loss);
    }
    CHECK(slurp(dir_full / "checkpoint.json") == slurp(dir_rest / "checkpoint.json"));
    std::filesystem::remove_all(dir_full);
    std::filesystem::remove_all(dir_half);
    std::filesystem::remove_all(dir_rest);
}

TEST_CASE("run_evaluation checks shapes and reproduces trainer statistics") {
    const auto dir = temp_dir("semcom_eval");
    ExperimentConfig cfg = tiny_config();
    cfg.run.algorithm = "random";
    cfg.run.iterations = 1;
    run_training(cfg, dir.string());

    const EvalMetrics a = run_evaluation((dir / "checkpoint.json").string(), cfg, 16);
    const EvalMetrics b = run_evaluation((dir / "checkpoint.json").string(), cfg, 16);
    CHECK(a.latency_mean_s == b.latency_mean_s);
    CHECK(a.multi_rb_prob == b.multi_rb_prob);

    // a random-policy checkpoint is the random baseline
    Trainer trainer(cfg.train_setup());
    trainer.run_iteration();
    const EvalMetrics direct = trainer.evaluate(16);
    CHECK(a.latency_mean_s == direct.latency_mean_s);
    CHECK(a.mean_total_reward == direct.mean_total_reward);

    ExperimentConfig wrong = cfg;
    wrong.system.num_users = 7;
    CHECK_THROWS_AS(run_evaluation((dir / "checkpoint.json").string(), wrong, 4), ConfigError);
    CHECK_THROWS_AS(run_evaluation((dir / "checkpoint.json").string(), cfg, 0), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep tables cover every cell and record failures") {
    const auto dir = temp_dir("semcom_sweep");
    ExperimentConfig cfg = tiny_config();
    cfg.run.algorithm = "random";
    cfg.run.iterations = 1;
    cfg.run.eval_episodes = 60;

    SUBCASE("server axis: random-policy latency grows with co-channel reuse") {
        const auto table = run_sweep(cfg, "servers", {2, 4}, {"random"}, {1, 2}, dir.string());
        REQUIRE(table.size() == 4);
        for (const SweepCell& c : table) CHECK(c.status == "ok");
        double lat2 = 0, lat4 = 0;
        for (const SweepCell& c : table)
            (c.value == 2 ? lat2 : lat4) += c.eval.latency_mean_s / 2.0;
        CHECK(lat4 >= lat2);

        const auto loaded = read_sweep_table((dir / "sweep.csv").string());
        REQUIRE(loaded.size() == 4);
        CHECK(loaded[0].axis == "servers");
        CHECK(loaded[0].eval.latency_mean_s == table[0].eval.latency_mean_s);
    }
    SUBCASE("user axis: served fraction cannot grow with more users") {
        const auto table = run_sweep(cfg, "users", {5, 10}, {"random"}, {1, 2}, dir.string());
        REQUIRE(table.size() == 4);
        double f5 = 0, f10 = 0;
        for (const SweepCell& c : table)
            (c.value == 5 ? f5 : f10) += c.eval.served_fraction / 2.0;
        CHECK(f10 <= f5);
    }
    SUBCASE("failing cells are recorded and the sweep continues") {
        ExperimentConfig bad = cfg;
        bad.run.algorithm = "vdn-dqn";
        bad.run.iterations = 30;
        bad.hyper.adam = false;
        bad.hyper.lr_q = 1e9;
        const auto table = run_sweep(bad, "users", {5}, {"vdn-dqn"}, {1}, dir.string());
        REQUIRE(table.size() == 1);
        CHECK(table[0].status.rfind("failed:", 0) == 0);
        CHECK(std::filesystem::exists(dir / "sweep.csv"));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("plots are well-formed SVG naming every series") {
    const auto dir = temp_dir("semcom_plots");
    ExperimentConfig cfg = tiny_config();
    const RunMetrics metrics = run_training(cfg, dir.string());
    emit_plots(metrics, dir.string());

    const std::string reward_svg = slurp(dir / "reward_vs_iteration.svg");
    CHECK(reward_svg.find("<svg") != std::string::npos);
    CHECK(reward_svg.find("</svg>") != std::string::npos);
    CHECK(reward_svg.find("<polyline") != std::string::npos);
    CHECK(reward_svg.find("total reward") != std::string::npos);

    std::vector<SweepCell> table;
    for (const std::string algo : {"vd-erl", "random"})
        for (double value : {8.0, 12.0}) {
            SweepCell c;
            c.axis = "users";
            c.value = value;
            c.algorithm = algo;
            c.eval.latency_mean_s = value * (algo == "random" ? 2e-5 : 1e-5);
            table.push_back(c);
        }
    emit_sweep_plot(table, (dir / "latency_vs_axis.svg").string());
    const std::string sweep_svg = slurp(dir / "latency_vs_axis.svg");
    std::size_t polylines = 0;
    for (std::size_t pos = sweep_svg.find("<polyline"); pos != std::string::npos;
         pos = sweep_svg.find("<polyline", pos + 1))
        ++polylines;
    CHECK(polylines == 2);
    CHECK(sweep_svg.find("vd-erl") != std::string::npos);
    CHECK(sweep_svg.find("random") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("plateau detection on synthetic reward curves") {
    std::vector<double> curve;
    for (int i = 0; i < 60; ++i) curve.push_back(i); // still climbing
    CHECK_FALSE(plateau_iteration(curve, 10, 30, 0.02).has_value());

    curve.clear();
    for (int i = 0; i < 40; ++i) curve.push_back(i * 0.5);
    for (int i = 0; i < 120; ++i) curve.push_back(20.0);
    const auto p = plateau_iteration(curve, 10, 30, 0.02);
    REQUIRE(p.has_value());
    CHECK(*p >= 35);
    CHECK(*p <= 60);

    std::vector<double> flat(100, 5.0);
    const auto pf = plateau_iteration(flat, 10, 30, 0.02);
    REQUIRE(pf.has_value());
    CHECK(*pf == 9); // first full smoothing window
}

TEST_CASE("a single-cell sweep reproduces a direct training run") {
    const auto dir_sweep = temp_dir("semcom_sweep_single");
    const auto dir_direct = temp_dir("semcom_sweep_direct");
    ExperimentConfig cfg = tiny_config();
    cfg.run.algorithm = "random";
    cfg.run.iterations = 1;
    cfg.run.eval_episodes = 10;

    const auto table = run_sweep(cfg, "users", {5}, {"random"}, {3}, dir_sweep.string());
    REQUIRE(table.size() == 1);
    REQUIRE(table[0].status == "ok");

    ExperimentConfig direct = cfg;
    direct.run.seed = 3;
    const RunMetrics metrics = run_training(direct, dir_direct.string());
    REQUIRE_FALSE(metrics.evaluations.empty());
    CHECK(table[0].eval.latency_mean_s == metrics.evaluations.back().latency_mean_s);
    CHECK(table[0].eval.multi_rb_prob == metrics.evaluations.back().multi_rb_prob);
    CHECK(table[0].eval.served_fraction == metrics.evaluations.back().served_fraction);
    std::filesystem::remove_all(dir_sweep);
    std::filesystem::remove_all(dir_direct);
}

TEST_CASE("training from a scenario file pins the world and its dataset") {
    const auto dir = temp_dir("semcom_scenario_train");
    ExperimentConfig cfg = tiny_config();
    cfg.run.iterations = 1;
    cfg.run.eval_episodes = 4;

    // freeze a world: topology plus a dataset of scene graphs
    std::vector<SceneGraph> graphs;
    rng::Stream gs(77);
    for (int i = 0; i < 8; ++i)
        graphs.push_back(generate_scene_graph(cfg.generator, "img-" + std::to_string(i), gs));
    const std::string dataset = (dir / "images.jsonl").string();
    write_dataset_file(dataset, graphs);

    Scenario scenario;
    auto ts = rng::stream(9, "topology");
    scenario.topology = gen_topology(cfg.effective_geometry(), ts);
    scenario.channel_seed = 4242;
    scenario.dataset_path = dataset;
    const std::string scenario_path = (dir / "scenario.json").string();
    write_scenario_file(scenario_path, scenario);

    cfg.run.scenario_path = scenario_path;
    TrainSetup setup = cfg.train_setup();
    CHECK(setup.world_seed == 4242);
    CHECK(setup.dataset_path == dataset);

    // different run seeds, same scenario: identical worlds, different nets
    Trainer a(setup);
    TrainSetup setup_b = setup;
    setup_b.seed = setup.seed + 1;
    Trainer b(setup_b);
    Env ea = a.make_env(), eb = b.make_env();
    a.reset_env_for_episode(ea, 0);
    b.reset_env_for_episode(eb, 0);
    CHECK(ea.channels().fading == eb.channels().fading);
    CHECK(ea.content(0).graph.image_id == eb.content(0).graph.image_id);
    CHECK(ea.content(0).graph.image_id == "img-0"); // round-robin over the dataset

    const RunMetrics metrics = run_training(cfg, (dir / "out").string());
    CHECK(metrics.training.size() == 1);
    std::filesystem::remove_all(dir);
}
