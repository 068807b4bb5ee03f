// Kernel benchmark: serial reference vs the OpenMP backend on the shapes the
// trainer actually runs (batch linear algebra and a full training loop).

#include <chrono>
#include <cstdio>
#include <thread>

#include "mmfuse/kernels.hpp"
#include "mmfuse/nn.hpp"
#include "mmfuse/rng.hpp"

using namespace mmfuse;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e18;
    for (int i = 0; i < reps; ++i) {
        auto t0 = Clock::now();
        fn();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

void bench_kernels(int threads) {
    Rng rng(1);
    struct Shape {
        std::size_t n, in, out;
    };
    const Shape shapes[] = {{256, 64, 64}, {1024, 128, 128}, {2048, 256, 128}};
    std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");
    for (const auto& s : shapes) {
        Matrix X = random_matrix(s.n, s.in, rng);
        Matrix W = random_matrix(s.out, s.in, rng);
        Vec b(s.out, 0.1);
        Matrix dZ = random_matrix(s.n, s.out, rng);
        Matrix Z, dX, dW;
        Vec db;

        char label[64];
        std::snprintf(label, sizeof(label), "linear_forward %zux%zux%zu", s.n, s.in, s.out);
        double t_serial = time_best_of(5, [&] { kernels::serial::linear_forward(X, W, b, Z); });
        kernels::set_threads(threads);
        double t_par = time_best_of(5, [&] { kernels::par::linear_forward(X, W, b, Z); });
        kernels::set_threads(1);
        std::printf("%-28s %10.3f %10.3f %7.2fx\n", label, t_serial, t_par, t_serial / t_par);

        std::snprintf(label, sizeof(label), "backward_params %zux%zux%zu", s.n, s.in, s.out);
        t_serial =
            time_best_of(5, [&] { kernels::serial::linear_backward_params(dZ, X, dW, db); });
        kernels::set_threads(threads);
        t_par = time_best_of(5, [&] { kernels::par::linear_backward_params(dZ, X, dW, db); });
        kernels::set_threads(1);
        std::printf("%-28s %10.3f %10.3f %7.2fx\n", label, t_serial, t_par, t_serial / t_par);

        std::snprintf(label, sizeof(label), "backward_input %zux%zux%zu", s.n, s.in, s.out);
        t_serial =
            time_best_of(5, [&] { kernels::serial::linear_backward_input(dZ, W, dX); });
        kernels::set_threads(threads);
        t_par = time_best_of(5, [&] { kernels::par::linear_backward_input(dZ, W, dX); });
        kernels::set_threads(1);
        std::printf("%-28s %10.3f %10.3f %7.2fx\n", label, t_serial, t_par, t_serial / t_par);
    }
}

void bench_training(int threads) {
    Rng rng(7);
    const std::size_t n = 1024, d = 32;
    nn::LabeledSet train_set, val_set;
    train_set.features = random_matrix(n, d, rng);
    val_set.features = random_matrix(256, d, rng);
    for (std::size_t i = 0; i < n; ++i)
        train_set.labels.push_back(train_set.features(i, 0) > 0 ? 1 : 0);
    for (std::size_t i = 0; i < 256; ++i)
        val_set.labels.push_back(val_set.features(i, 0) > 0 ? 1 : 0);

    nn::DenseNetwork net = nn::make_network(d, {64, 64, 32}, 2);
    Rng wrng(3);
    nn::init_weights(net, wrng);
    nn::TrainConfig cfg;
    cfg.max_epochs = 10;
    cfg.early_stop_patience = 100;
    cfg.seed = 9;

    kernels::set_threads(1);
    auto t0 = Clock::now();
    nn::train(net, train_set, val_set, cfg, 1.0);
    double t_serial = ms_since(t0);

    kernels::set_threads(threads);
    t0 = Clock::now();
    nn::train(net, train_set, val_set, cfg, 1.0);
    double t_par = ms_since(t0);
    kernels::set_threads(1);

    std::printf("%-28s %10.3f %10.3f %7.2fx\n", "train 10 epochs (mlp-1 dims)", t_serial, t_par,
                t_serial / t_par);
}

}  // namespace

int main(int argc, char** argv) {
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (argc > 1) threads = std::atoi(argv[1]);
    if (threads < 1) threads = 1;
    std::printf("parallel backend: %d thread(s)\n\n", threads);
    bench_kernels(threads);
    std::printf("\n");
    bench_training(threads);
    return 0;
}
