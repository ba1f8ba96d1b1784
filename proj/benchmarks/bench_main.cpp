#include <benchmark/benchmark.h>

#include "qotl/logic.hpp"
#include "qotl/transport.hpp"

namespace {

using namespace qotl;

// Interior-feasible by construction: constraints pin tr(A_k X) to the value
// at a strictly positive X0.
SdpProblem random_feasible_sdp(int dim, int m, uint64_t seed) {
    Rng rng(seed);
    SdpProblem p;
    p.block_dims = {dim};
    p.objective = {rng.random_herm(dim)};
    const Mat x0 = rng.random_psd(dim) + 0.1 * Mat::identity(dim);
    for (int k = 0; k < m; ++k) {
        SdpConstraint c;
        c.coeff = {rng.random_herm(dim)};
        c.rhs = trace(c.coeff[0] * x0).real();
        p.constraints.push_back(std::move(c));
    }
    return p;
}

void bm_sdp_solve(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const SdpProblem p = random_feasible_sdp(dim, 2 * dim, 7);
    for (auto _ : state) benchmark::DoNotOptimize(sdp_solve(p));
}
BENCHMARK(bm_sdp_solve)->Arg(4)->Arg(8)->Arg(16);

void bm_herm_eig(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    Rng rng(11);
    const Mat a = rng.random_herm(dim);
    for (auto _ : state) benchmark::DoNotOptimize(herm_eig(a));
}
BENCHMARK(bm_herm_eig)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void bm_denote_loop(benchmark::State& state) {
    Environment env;
    env.vars = {{"q", 2}, {"r", 2}};
    const ProgramPtr p = parse_program_or_throw(
        "[q] *= U(H); while M(comp)[q] == 1 do { [r] *= U(X); [q] *= U(H) } od");
    for (auto _ : state) benchmark::DoNotOptimize(denote(p, env));
}
BENCHMARK(bm_denote_loop);

void bm_transport_qubit_pair(benchmark::State& state) {
    Rng rng(23);
    const DensityOperator r1 = DensityOperator::make(rng.random_density(4));
    const DensityOperator r2 = DensityOperator::make(rng.random_density(4));
    const IVPredicate cost = ivp_from_matrix(sym_projectors(4).p_asym);
    for (auto _ : state)
        benchmark::DoNotOptimize(transport_value(cost, r1, r2, TransportMode::exact));
}
BENCHMARK(bm_transport_qubit_pair);

}  // namespace

BENCHMARK_MAIN();
