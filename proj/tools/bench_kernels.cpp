// Timing comparison of the serial reference kernels against the chunked
// OpenMP paths: batch TD/policy gradients and evaluation rollouts.

#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "semcom/config.hpp"
#include "semcom/learner.hpp"

using namespace semcom;
namespace chrono = std::chrono;

namespace {

double ms_since(chrono::steady_clock::time_point t0) {
    return chrono::duration<double, std::milli>(chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    if (argc > 1) threads = std::atoi(argv[1]);
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    std::printf("worker threads: %d\n", threads > 0 ? threads : 1);

    ExperimentConfig cfg = config_from_json_text(R"({
        "system": {"num_servers": 3, "num_users": 12, "num_rbs": 4},
        "geometry": {"server_ring_radius_m": 120, "area_radius_m": 260, "coverage_radius_m": 260},
        "generator": {"triples_min": 3, "triples_max": 6},
        "run": {"seed": 7}
    })");
    TrainSetup setup = cfg.train_setup();
    setup.parallel = threads > 1 ? threads : 1;
    Trainer trainer(setup);

    // Fill the store with a few warmup iterations.
    for (int i = 0; i < 4; ++i) trainer.run_iteration();

    auto bstream = rng::stream(7, "bench-batch");
    const int B = 256;
    const auto batch = trainer.store().sample(B, bstream);
    const int reps = 20;

    {
        auto t0 = chrono::steady_clock::now();
        double checksum = 0.0;
        for (int r = 0; r < reps; ++r)
            checksum += td_loss_and_grads_serial(trainer.store(), batch, trainer.agents()).loss;
        const double serial_ms = ms_since(t0) / reps;

        t0 = chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r)
            checksum -= td_loss_and_grads(trainer.store(), batch, trainer.agents(), true).loss;
        const double parallel_ms = ms_since(t0) / reps;
        std::printf("td batch %d      serial %8.3f ms   parallel %8.3f ms   speedup %.2fx"
                    "   (residual %.3e)\n",
                    B, serial_ms, parallel_ms, serial_ms / parallel_ms, checksum);
    }
    {
        auto t0 = chrono::steady_clock::now();
        double checksum = 0.0;
        for (int r = 0; r < reps; ++r)
            checksum +=
                policy_loss_and_grads_serial(trainer.store(), batch, trainer.agents(), 0.1)
                    .mean_loss;
        const double serial_ms = ms_since(t0) / reps;

        t0 = chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r)
            checksum -=
                policy_loss_and_grads(trainer.store(), batch, trainer.agents(), 0.1, true)
                    .mean_loss;
        const double parallel_ms = ms_since(t0) / reps;
        std::printf("policy batch %d  serial %8.3f ms   parallel %8.3f ms   speedup %.2fx"
                    "   (residual %.3e)\n",
                    B, serial_ms, parallel_ms, serial_ms / parallel_ms, checksum);
    }
    {
        // Evaluation rollouts: serial mode vs parallel episode fan-out.
        TrainSetup serial_setup = setup;
        serial_setup.parallel = 1;
        Trainer serial_trainer(serial_setup);
        for (int i = 0; i < 4; ++i) serial_trainer.run_iteration();

        auto t0 = chrono::steady_clock::now();
        EvalMetrics a = serial_trainer.evaluate(200);
        const double serial_ms = ms_since(t0);

        t0 = chrono::steady_clock::now();
        EvalMetrics b = trainer.evaluate(200);
        const double parallel_ms = ms_since(t0);
        std::printf("eval 200 eps     serial %8.3f ms   parallel %8.3f ms   speedup %.2fx"
                    "   (latency delta %.3e)\n",
                    serial_ms, parallel_ms, serial_ms / parallel_ms,
                    a.latency_mean_s - b.latency_mean_s);
    }
    return 0;
}
