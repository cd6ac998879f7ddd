#include <benchmark/benchmark.h>

#include <numbers>

#include "fpanel/classify.hpp"
#include "fpanel/panel.hpp"
#include "fpanel/refit.hpp"
#include "fpanel/rng.hpp"
#include "fpanel/simulation.hpp"

using namespace fpanel;

namespace {

Panel bench_panel(int n, int T, int L) {
    SimConfig cfg;
    cfg.scenario = 1;
    cfg.n = n;
    cfg.T = T;
    cfg.L = L;
    cfg.seed = 12;
    return dgp_scenario(cfg, 0).first;
}

}  // namespace

static void BM_eigen_fpca(benchmark::State& state) {
    const Panel panel = bench_panel(100, 1, static_cast<int>(state.range(0)));
    const CenteredSlice slice = within_center(panel, 0);
    const Eigen::MatrixXd kernel = empirical_covariance(slice.x);
    for (auto _ : state) {
        EigenSystem eig = eigen_fpca(kernel, panel.grid, 20);
        benchmark::DoNotOptimize(eig);
    }
}
BENCHMARK(BM_eigen_fpca)->Arg(51)->Arg(101)->Arg(201);

static void BM_fit_period(benchmark::State& state) {
    const Panel panel = bench_panel(static_cast<int>(state.range(0)), 1, 101);
    FitConfig config;
    config.m_override = 3;
    for (auto _ : state) {
        PeriodFit fit = fit_period(panel, 0, config);
        benchmark::DoNotOptimize(fit);
    }
}
BENCHMARK(BM_fit_period)->Arg(50)->Arg(100)->Arg(200);

static void BM_fit_step1(benchmark::State& state) {
    const Panel panel = bench_panel(100, static_cast<int>(state.range(0)), 101);
    FitConfig config;
    config.m_override = 3;
    for (auto _ : state) {
        StepOneFit fit = fit_step1(panel, config);
        benchmark::DoNotOptimize(fit);
    }
}
BENCHMARK(BM_fit_step1)->Arg(10)->Arg(50);

static void BM_chi2_quantile(benchmark::State& state) {
    double p = 0.90;
    for (auto _ : state) {
        benchmark::DoNotOptimize(chi2_quantile(3, p));
        p = p < 0.999 ? p + 1e-5 : 0.90;
    }
}
BENCHMARK(BM_chi2_quantile);

static void BM_classify_threshold(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    Rng rng(5, 0, 0);
    Eigen::MatrixXd delta(T, T);
    for (int a = 0; a < T; ++a)
        for (int b = 0; b <= a; ++b) {
            const double v = a == b ? 0.0 : ((a / (T / 3 + 1) == b / (T / 3 + 1)) ? 0.05 : 2.0);
            delta(a, b) = v;
            delta(b, a) = v;
        }
    for (auto _ : state) {
        RegimePartition part = classify_threshold(delta, 0.5, 10);
        benchmark::DoNotOptimize(part);
    }
}
BENCHMARK(BM_classify_threshold)->Arg(50)->Arg(80);

static void BM_ch_kmax(benchmark::State& state) {
    const Panel panel = bench_panel(50, static_cast<int>(state.range(0)), 101);
    FitConfig config;
    config.m_override = 3;
    const StepOneFit step1 = fit_step1(panel, config);
    for (auto _ : state) {
        const int k = kmax_calinski_harabasz(step1, panel.grid, 101, 0, {});
        benchmark::DoNotOptimize(k);
    }
}
BENCHMARK(BM_ch_kmax)->Arg(20)->Arg(50);

static void BM_refit(benchmark::State& state) {
    const int T = 21;
    const Panel panel = bench_panel(static_cast<int>(state.range(0)), T, 101);
    FitConfig config;
    config.m_override = 3;
    const StepOneFit step1 = fit_step1(panel, config);
    RegimePartition part;
    part.regimes = truth_partition(T);
    part.k_max = 3;
    for (auto _ : state) {
        RegimeFit fit = refit_regimes(panel, part, step1, 3);
        benchmark::DoNotOptimize(fit);
    }
}
BENCHMARK(BM_refit)->Arg(50)->Arg(100);

static void BM_mc_replication(benchmark::State& state) {
    SimConfig config;
    config.scenario = 1;
    config.n = 50;
    config.T = 21;
    config.reps = 1;
    config.seed = 9;
    config.m_override = 3;
    config.threads = 1;
    for (auto _ : state) {
        SimReport rep = run_monte_carlo(config);
        benchmark::DoNotOptimize(rep);
    }
}
BENCHMARK(BM_mc_replication);

BENCHMARK_MAIN();
