// Serial reference vs OpenMP kernel for the three hot loops.

#include <benchmark/benchmark.h>

#include <random>

#include "kgscatter/inversion.hpp"
#include "kgscatter/kg_solver.hpp"
#include "kgscatter/lineflux.hpp"
#include "kgscatter/parallel.hpp"
#include "kgscatter/potentials.hpp"

using namespace kgs;

namespace {

std::vector<LineQuery> random_lines(int n)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<LineQuery> q;
    for (int k = 0; k < n; ++k)
        q.push_back({Line{0.5 * Vec3(nd(rng), nd(rng), nd(rng)), Vec3(nd(rng), nd(rng), nd(rng)).normalized()}, {}});
    return q;
}

const VectorPotential& bench_A()
{
    static const VectorPotential A = make_vortex_potential(Vec3(0.1, 0, 0), Vec3(0.3, 0.2, 1).normalized(), 0.6, 1.0);
    return A;
}

const ElectricPotential& bench_A0()
{
    static const ElectricPotential E = make_gaussian_electric(Vec3(0, 0.2, 0), 0.7, 0.5);
    return E;
}

void BM_xray_batch(benchmark::State& st)
{
    const auto q = random_lines(256);
    const bool par = st.range(0) != 0;
    for (auto _ : st) {
        auto r = par ? xray_batch(bench_A(), bench_A0(), q) : xray_batch_serial(bench_A(), bench_A0(), q);
        benchmark::DoNotOptimize(r.data());
    }
    st.SetItemsProcessed(st.iterations() * q.size());
    st.SetLabel(par ? "openmp" : "serial");
}

struct FbpData {
    Sinogram s;
    std::vector<double> filtered;
    std::vector<std::pair<double, double>> pts;
};

const FbpData& fbp_data()
{
    static const FbpData d = [] {
        FbpData d;
        SinogramSpec spec;
        spec.n_angles = 64;
        spec.n_offsets = 128;
        d.s = sample_sinogram([](const Line& l) { return xray_A0(bench_A0(), l, 1e-8); }, PlaneFrame{}, spec);
        d.filtered = ramp_filter(d.s);
        ReconstructionGrid g;
        g.n = 64;
        d.pts = g.plane_points();
        return d;
    }();
    return d;
}

void BM_backproject(benchmark::State& st)
{
    const FbpData& d = fbp_data();
    const bool par = st.range(0) != 0;
    for (auto _ : st) {
        auto r = par ? backproject(d.s, d.filtered, d.pts) : backproject_serial(d.s, d.filtered, d.pts);
        benchmark::DoNotOptimize(r.data());
    }
    st.SetItemsProcessed(st.iterations() * d.pts.size());
    st.SetLabel(par ? "openmp" : "serial");
}

void BM_interaction_update(benchmark::State& st)
{
    const std::size_t n = 512 * 512;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<cplx> phit(n), wphi(n);
    std::vector<double> a0(n);
    for (std::size_t k = 0; k < n; ++k) {
        phit[k] = {nd(rng), nd(rng)};
        wphi[k] = {nd(rng), nd(rng)};
        a0[k] = 0.1 * nd(rng);
    }
    const bool par = st.range(0) != 0;
    for (auto _ : st) {
        if (par)
            interaction_update(phit, wphi, a0, 1e-3);
        else
            interaction_update_serial(phit, wphi, a0, 1e-3);
        benchmark::DoNotOptimize(phit.data());
    }
    st.SetItemsProcessed(st.iterations() * n);
    st.SetLabel(par ? "openmp" : "serial");
}

}  // namespace

BENCHMARK(BM_xray_batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_backproject)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_interaction_update)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
