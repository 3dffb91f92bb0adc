#include <vector>

#include <benchmark/benchmark.h>

#include "jdc/coupling.hpp"
#include "jdc/model.hpp"

namespace {

jdc::ModelSpec piecewise_model() {
    jdc::ModelSpec m;
    m.dim = 1;
    m.drift = jdc::piecewise_drift(2.0, 1.0, 4.0, 2.0, 1.0, 1.0);
    m.diffusion.sigma1 = jdc::Mat::Identity(1, 1);
    return m;
}

jdc::ModelSpec stable_model() {
    jdc::ModelSpec m;
    m.dim = 1;
    m.drift = jdc::piecewise_drift(2.0, 1.0, 4.0, 2.0, 1.0, 1.0);
    m.levy = jdc::RadialLevyMeasure::stable(1.5, 1.0, 1);
    return m;
}

jdc::EnsembleOptions options(std::size_t n, int workers) {
    jdc::EnsembleOptions o;
    o.n_paths = n;
    o.seed = 7;
    o.workers = workers;
    o.record_every = 100;
    return o;
}

const std::vector<double> x0{0.5}, y0{-0.5};

void bm_reflection_serial(benchmark::State& st) {
    const auto m = piecewise_model();
    const jdc::CouplingScheme s{jdc::SchemeKind::Reflection};
    for (auto _ : st) {
        auto r = jdc::run_ensemble_serial(m, s, x0, y0, 2.0, 1e-3, options(st.range(0), 1));
        benchmark::DoNotOptimize(r.dist.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void bm_reflection_parallel(benchmark::State& st) {
    const auto m = piecewise_model();
    const jdc::CouplingScheme s{jdc::SchemeKind::Reflection};
    for (auto _ : st) {
        auto r = jdc::run_ensemble(m, s, x0, y0, 2.0, 1e-3, options(st.range(0), 0));
        benchmark::DoNotOptimize(r.dist.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void bm_mirror_serial(benchmark::State& st) {
    const auto m = stable_model();
    const jdc::CouplingScheme s{jdc::SchemeKind::Mirror};
    for (auto _ : st) {
        auto r = jdc::run_ensemble_serial(m, s, x0, y0, 2.0, 1e-3, options(st.range(0), 1));
        benchmark::DoNotOptimize(r.dist.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void bm_mirror_parallel(benchmark::State& st) {
    const auto m = stable_model();
    const jdc::CouplingScheme s{jdc::SchemeKind::Mirror};
    for (auto _ : st) {
        auto r = jdc::run_ensemble(m, s, x0, y0, 2.0, 1e-3, options(st.range(0), 0));
        benchmark::DoNotOptimize(r.dist.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(bm_reflection_serial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_reflection_parallel)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mirror_serial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mirror_parallel)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
