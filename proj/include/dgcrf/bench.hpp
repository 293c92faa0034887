#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/grad_check.hpp"

namespace dgcrf {

struct BenchRow {
    std::size_t n = 0;
    std::size_t d = 0;
    double apply_ns = 0.0; // median wall time of one operator application
    double solve_ms = 0.0; // median wall time of one forward solve
    std::size_t cg_iters = 0;
};

/// Deterministic layer + unary for a bench cell: seeded by (seed, N, D).
inline std::pair<GcrfLayer, Vector> bench_instance(std::size_t n, std::size_t d, std::uint64_t seed, double lambda = 1.0,
                                                   CgConfig cg = {})
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(d)};
    std::mt19937_64 rng(seq);
    GcrfLayer layer(Dims(n, 1, d), standard_embeddings(d, n, rng), lambda, cg);
    Vector b = random_vector(n, rng);
    return {std::move(layer), std::move(b)};
}

inline double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Median nanoseconds per operator application. Each sample batches enough
/// applications to last roughly half a millisecond.
inline double time_apply(const GcrfLayer& layer, std::size_t repeats)
{
    using clock = std::chrono::steady_clock;
    const auto op = layer.op();
    const std::size_t n = layer.variables();
    std::vector<double> v(n, 1.0), out(n);
    const std::size_t flops = 2 * layer.dims().embed_dim * n + n;
    const std::size_t inner = std::max<std::size_t>(1, 500000 / flops);
    op.apply(v, out); // warm caches
    std::vector<double> samples;
    samples.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = clock::now();
        for (std::size_t i = 0; i < inner; ++i) {
            op.apply(v, out);
            v[i % n] += out[0] * 1e-300; // keep the call observable
        }
        const auto t1 = clock::now();
        samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() / static_cast<double>(inner));
    }
    return median(std::move(samples));
}

inline BenchRow bench_cell(std::size_t n, std::size_t d, std::size_t repeats, std::uint64_t seed)
{
    using clock = std::chrono::steady_clock;
    auto [layer, b] = bench_instance(n, d, seed);
    BenchRow row{n, d, time_apply(layer, repeats), 0.0, 0};
    std::vector<double> solve_samples;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = clock::now();
        auto res = forward(layer, b);
        const auto t1 = clock::now();
        solve_samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        row.cg_iters = res.report.iterations;
    }
    row.solve_ms = median(std::move(solve_samples));
    return row;
}

inline std::vector<BenchRow> run_bench(const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ds,
                                       std::size_t repeats, std::uint64_t seed = 0)
{
    std::vector<BenchRow> rows;
    for (std::size_t n : ns)
        for (std::size_t d : ds) rows.push_back(bench_cell(n, d, repeats, seed));
    return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows)
{
    out << "N,D,apply_ns,solve_ms,cg_iters\n";
    for (const auto& r : rows) {
        std::string line = std::to_string(r.n) + "," + std::to_string(r.d) + ",";
        detail::append_shortest(line, r.apply_ns);
        line += ',';
        detail::append_shortest(line, r.solve_ms);
        line += "," + std::to_string(r.cg_iters) + "\n";
        out << line;
    }
}

} // namespace dgcrf
