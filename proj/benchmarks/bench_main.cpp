#include "rgs/analytic_recon.hpp"
#include "rgs/init.hpp"
#include "rgs/phantom.hpp"
#include "rgs/projector.hpp"
#include "rgs/wavelet.hpp"

#include <benchmark/benchmark.h>

namespace {

rgs::ConeBeamGeometry desk_geometry(std::size_t views) {
    rgs::ConeBeamGeometry g;
    g.angles = rgs::ConeBeamGeometry::full_scan_angles(views);
    return g;
}

const rgs::ProjectionStack& texture_stack() {
    static const rgs::ProjectionStack s =
        rgs::simulate_drr(rgs::texture_phantom(rgs::Vec3(20, 20, 16)), desk_geometry(20));
    return s;
}

rgs::GaussianSet base_set(std::size_t n) {
    const rgs::GridSpec grid = rgs::GridSpec::centered({64, 64, 64}, rgs::Vec3::Constant(0.7));
    const rgs::ReconResult prior = rgs::fdk(texture_stack(), grid);
    rgs::InitConfig cfg;
    cfg.n_base = n;
    return rgs::init_base(prior.volume, cfg).set;
}

void BM_Render(benchmark::State& state) {
    const rgs::GaussianSet set = base_set(static_cast<std::size_t>(state.range(0)));
    const rgs::Projector proj(desk_geometry(20));
    for (auto _ : state) benchmark::DoNotOptimize(proj.render(set));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(set.size()));
}
BENCHMARK(BM_Render)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
    const rgs::GaussianSet set = base_set(static_cast<std::size_t>(state.range(0)));
    const rgs::Projector proj(desk_geometry(20));
    const rgs::ProjectionStack grad = texture_stack();
    for (auto _ : state) benchmark::DoNotOptimize(proj.backward(set, grad.views));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(set.size()));
}
BENCHMARK(BM_Backward)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Fdk(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const rgs::GridSpec grid = rgs::GridSpec::centered({n, n, n}, rgs::Vec3::Constant(44.8 / n));
    for (auto _ : state) benchmark::DoNotOptimize(rgs::fdk(texture_stack(), grid));
}
BENCHMARK(BM_Fdk)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Dwt(benchmark::State& state) {
    const rgs::Image2D& img = texture_stack().views[0];
    for (auto _ : state) benchmark::DoNotOptimize(rgs::dwt2(img));
}
BENCHMARK(BM_Dwt);

}  // namespace

BENCHMARK_MAIN();
