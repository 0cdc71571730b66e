#include <benchmark/benchmark.h>

#include "enscert/autodiff.hpp"
#include "enscert/ensemble.hpp"
#include "enscert/model.hpp"
#include "enscert/numstats.hpp"
#include "enscert/smoothing.hpp"
#include "enscert/training.hpp"

using namespace enscert;

static void BM_std_normal_cdf(benchmark::State& state) {
    double x = -6.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(numstats::std_normal_cdf(x));
        x += 1e-4;
        if (x > 6.0) x = -6.0;
    }
}
BENCHMARK(BM_std_normal_cdf);

static void BM_std_normal_quantile(benchmark::State& state) {
    double p = 1e-4;
    for (auto _ : state) {
        benchmark::DoNotOptimize(numstats::std_normal_quantile(p));
        p += 1e-5;
        if (p > 1.0 - 1e-4) p = 1e-4;
    }
}
BENCHMARK(BM_std_normal_quantile);

static void BM_clopper_pearson_lower(benchmark::State& state) {
    const int64_t n = state.range(0);
    int64_t k = n / 2;
    for (auto _ : state) {
        benchmark::DoNotOptimize(numstats::clopper_pearson_lower(k, n, 0.001));
        k = k >= n ? n / 2 : k + 1;
    }
}
BENCHMARK(BM_clopper_pearson_lower)->Arg(10000)->Arg(100000);

static void BM_gaussian_sample(benchmark::State& state) {
    numstats::RngStream rng(1, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng.normal());
    }
}
BENCHMARK(BM_gaussian_sample);

static void BM_mlp_forward(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    numstats::RngStream rng(2, 0);
    const auto m = model::MlpClassifier::init_random(d, {64, 64}, 10, rng);
    const Vector x = numstats::sample_gaussian(rng, d, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(m.confidences(x));
    }
}
BENCHMARK(BM_mlp_forward)->Arg(2)->Arg(784);

static void BM_margin_input_gradient(benchmark::State& state) {
    numstats::RngStream rng(3, 0);
    const auto m = model::MlpClassifier::init_random(784, {64, 64}, 10, rng);
    const Vector x = numstats::sample_gaussian(rng, 784, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(m.margin_input_gradient(x, 0, 1));
    }
}
BENCHMARK(BM_margin_input_gradient);

static void BM_gd_loss_graph_backward(benchmark::State& state) {
    numstats::RngStream r1(4, 0), r2(4, 1), rx(4, 2);
    const auto a = model::MlpClassifier::init_random(784, {64, 64}, 10, r1);
    const auto b = model::MlpClassifier::init_random(784, {64, 64}, 10, r2);
    const Vector x = numstats::sample_gaussian(rx, 784, 0.25);
    for (auto _ : state) {
        autodiff::Graph g;
        const auto node = training::gd_loss(g, a, b, x, 0);
        benchmark::DoNotOptimize(g.backward(node));
    }
}
BENCHMARK(BM_gd_loss_graph_backward);

static void BM_we_predict(benchmark::State& state) {
    std::vector<model::MlpClassifier> members;
    for (int i = 0; i < 3; ++i) {
        numstats::RngStream rng(5, i);
        members.push_back(model::MlpClassifier::init_random(2, {64, 64}, 2, rng));
    }
    const std::vector<double> w = {1.0, 1.0, 1.0};
    numstats::RngStream rng(5, 100);
    const Vector x = numstats::sample_gaussian(rng, 2, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ensemble::we_predict(members, w, x));
    }
}
BENCHMARK(BM_we_predict);

static void BM_certify_ebs(benchmark::State& state) {
    std::vector<model::MlpClassifier> members;
    for (int i = 0; i < 3; ++i) {
        numstats::RngStream rng(6, i);
        members.push_back(model::MlpClassifier::init_random(2, {64, 64}, 2, rng));
    }
    const auto ens = ensemble::EnsembleSpec::we(members, {1.0, 1.0, 1.0});
    smoothing::SmoothingSpec spec;
    spec.sigma = 0.5;
    spec.n0 = 100;
    spec.n = static_cast<int64_t>(state.range(0));
    spec.alpha = 0.001;
    numstats::RngStream rng(6, 100);
    const Vector x = {0.5, -0.25};
    for (auto _ : state) {
        numstats::RngStream r = rng.substream(static_cast<uint64_t>(state.iterations()));
        benchmark::DoNotOptimize(smoothing::certify_ebs(ens, spec, x, 0, r));
    }
}
BENCHMARK(BM_certify_ebs)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
