// Acceptance suite: one PASS/FAIL line per criterion.
//
//   dgcrf_acceptance            run all criteria
//   dgcrf_acceptance 2 5        run only criteria 2 and 5

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dgcrf/dgcrf.hpp"
#include "support/model_fd.hpp"

using namespace dgcrf;

namespace {

// Tolerances and limits.
constexpr double kSolverRelTol = 1e-8;
constexpr double kIterResidual = 1e-8;
constexpr double kRatioLo = 1.6, kRatioHi = 2.6;
constexpr double kNaiveTol = 1e-10;
constexpr double kFdTol = 1e-5;
constexpr double kScalarTol = 1e-10;
constexpr double kPdSlack = 1e-9;
// Energy values are compared up to their own evaluation rounding: 4 ulps of |E|.
constexpr double kEnergyUlps = 4.0;
constexpr std::size_t kMinPositiveSeeds = 9;
constexpr double kMinMeanDelta = 0.01;
constexpr double kModelFdTol = 1e-4;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// 1. CG vs dense Cholesky over 50 instances.
Outcome solver_equivalence()
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> pick_n(2, 200), pick_d(1, 16);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = pick_n(rng), d = pick_d(rng);
        GcrfLayer layer(Dims(n, 1, d), standard_embeddings(d, n, rng), 1.0);
        const Vector b = random_vector(n, rng);
        const Vector direct = reference::direct_solve({reference::assemble_dense(layer), b});
        worst = std::max(worst, norm2(forward(layer, b).x - direct) / norm2(direct));
    }
    return {worst <= kSolverRelTol, "max rel err " + num(worst) + " (tol " + num(kSolverRelTol) + ")"};
}

// 2. Iterations to 1e-8 relative residual stay within D + 2.
Outcome iteration_bound()
{
    CgConfig cg;
    cg.rel_tol = kIterResidual;
    cg.abs_tol = 0.0;
    bool ok = true;
    std::string worst;
    long slack = 1 << 30;
    for (std::size_t n : {128, 512})
        for (std::size_t d : {4, 8, 16, 32}) {
            auto [layer, b] = bench_instance(n, d, 0, 1.0, cg);
            const auto res = forward(layer, b);
            const long s = static_cast<long>(d + 2) - static_cast<long>(res.report.iterations);
            ok = ok && res.report.converged && s >= 0;
            if (s < slack) {
                slack = s;
                worst = "N=" + std::to_string(n) + " D=" + std::to_string(d) + " iters=" +
                        std::to_string(res.report.iterations);
            }
        }
    return {ok, "tightest cell " + worst};
}

// 3. Apply time roughly doubles from D=16 to D=32 at N=4096.
Outcome apply_linearity()
{
    auto [l16, b16] = bench_instance(4096, 16, 0);
    auto [l32, b32] = bench_instance(4096, 32, 0);
    const double t16 = time_apply(l16, 31), t32 = time_apply(l32, 31);
    const double ratio = t32 / t16;
    return {ratio >= kRatioLo && ratio <= kRatioHi,
            "ratio " + num(ratio) + " (" + num(t16) + " ns vs " + num(t32) + " ns; range [" + num(kRatioLo) + ", " +
                num(kRatioHi) + "])"};
}

// 4. Efficient gradient vs literal Kronecker form, finite differences and the adjoint residual.
Outcome gradient_exactness()
{
    std::mt19937_64 rng(104);
    std::uniform_int_distribution<std::size_t> pick_n(1, 40), pick_d(1, 6);
    double naive_err = 0.0, fd_err = 0.0, resid_ratio = 0.0;
    const CgConfig cg;
    for (int inst = 0; inst < 25; ++inst) {
        const std::size_t n = pick_n(rng), d = pick_d(rng);
        GcrfLayer layer(Dims(n, 1, d), standard_embeddings(d, n, rng), 1.0, cg);
        const Vector b = random_vector(n, rng), dl_dx = random_vector(n, rng);
        const auto x = forward(layer, b).x;
        const auto grads = backward(layer, x, dl_dx);
        const Matrix naive = reference::dlda_embedding_naive(layer.embeddings(), grads.d_unary, x);
        naive_err = std::max(naive_err, max_rel_diff(grads.d_embeddings.span(), naive.span()));
        const Matrix fd = reference::finite_diff_embedding_grad(layer, b, dl_dx, 1e-5);
        fd_err = std::max(fd_err, max_entry_rel_err(grads.d_embeddings.span(), fd.span(), kFiniteDiffFloor));
        const double resid = norm2(operator_apply(layer, grads.d_unary) - dl_dx);
        resid_ratio = std::max(resid_ratio, resid / grads.solve_report.threshold);
    }
    return {naive_err <= kNaiveTol && fd_err <= kFdTol && resid_ratio <= 1.0,
            "naive " + num(naive_err) + ", finite diff " + num(fd_err) + ", residual/threshold " + num(resid_ratio)};
}

// 5. D = N = 1: a = 2, lambda = 1, B = 10, dL/dx = 5.
Outcome scalar_case()
{
    GcrfLayer layer(Dims(1, 1, 1), Matrix(1, 1, {2.0}), 1.0);
    const auto x = forward(layer, Vector{10.0}).x;
    const auto g = backward(layer, x, Vector{5.0});
    const double err = std::max({std::abs(x[0] - 2.0) / 2.0, std::abs(g.d_unary[0] - 1.0),
                                 std::abs(g.d_embeddings(0, 0) + 8.0) / 8.0});
    return {err <= kScalarTol, "x=" + num(x[0]) + " g=" + num(g.d_unary[0]) + " dE=" + num(g.d_embeddings(0, 0)) +
                                   " (max rel err " + num(err) + ")"};
}

// 6. forward(B) minimizes the energy and the CG energy trace never increases.
Outcome energy_optimality()
{
    std::mt19937_64 rng(106);
    bool ok = true;
    std::size_t traces = 0, steps = 0;
    double worst_rise = -std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t n = 100, d = 12;
        CgConfig cg;
        cg.record_energy = true;
        cg.rel_tol = 1e-12;
        GcrfLayer layer(Dims(n, 1, d), random_matrix(d, n, rng, 0.5), 1.0, cg);
        const Vector b = random_vector(n, rng);
        const auto res = forward(layer, b);
        const double e0 = energy(layer, res.x, b);
        for (int k = 0; k < 100; ++k)
            ok = ok && e0 <= energy(layer, res.x + random_vector(n, rng, std::pow(10.0, -(k % 8))), b);
        const auto& tr = res.report.energy_trace;
        ok = ok && !tr.empty() && tr.front() == 0.0;
        for (std::size_t k = 1; k < tr.size(); ++k) {
            const double rounding = kEnergyUlps * std::numeric_limits<double>::epsilon() * std::abs(tr[k - 1]);
            ok = ok && tr[k] <= tr[k - 1] + rounding;
            worst_rise = std::max(worst_rise, (tr[k] - tr[k - 1]) / std::abs(tr[k - 1]));
        }
        ++traces;
        steps += tr.size() - 1;
    }
    return {ok, std::to_string(traces) + " instances x 100 perturbations, " + std::to_string(steps) +
                    " CG steps checked, largest relative step change " + num(worst_rise)};
}

// 7. v'(E'E + lambda I)v >= (lambda - 1e-9)|v|^2.
Outcome positive_definiteness()
{
    std::mt19937_64 rng(107);
    bool ok = true;
    double worst = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-6, 1.0, 1e3}) {
        GcrfLayer layer(Dims(128, 1, 16), random_matrix(16, 128, rng), lambda);
        for (int k = 0; k < 1000; ++k) {
            const Vector v = random_vector(128, rng);
            const double vv = dot(v, v);
            const double margin = dot(v, operator_apply(layer, v)) - (lambda - kPdSlack) * vv;
            ok = ok && margin >= 0.0;
            worst = std::min(worst, margin / vv);
        }
    }
    return {ok, "min (v'Av - (lambda - 1e-9)|v|^2)/|v|^2 = " + num(worst)};
}

// 8. Dense G-CRF beats unary-only on the default synthetic task across seeds 0..9.
Outcome learning_benefit()
{
    std::size_t positive = 0;
    double sum = 0.0;
    std::string deltas;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SyntheticTaskSpec spec;
        spec.seed = seed;
        TrainConfig cfg;
        cfg.seed = seed;
        const auto data = generate(spec);
        const auto res = train_two_phase(data.train, Dims(spec.pixels(), spec.labels, 8), spec.feature_dim(), cfg);
        const double delta = evaluate(res.model, data.test, cfg.lambda).delta();
        positive += delta > 0.0;
        sum += delta;
        deltas += (seed ? " " : "") + num(delta);
        std::fprintf(stderr, "  seed %llu delta %s\n", static_cast<unsigned long long>(seed), num(delta).c_str());
    }
    const double mean = sum / 10.0;
    return {positive >= kMinPositiveSeeds && mean >= kMinMeanDelta,
            std::to_string(positive) + "/10 positive, mean delta " + num(mean) + " [" + deltas + "]"};
}

// 9. ToyModel weight gradients vs end-to-end finite differences.
Outcome model_gradients()
{
    std::mt19937_64 rng(109);
    std::uniform_int_distribution<std::size_t> pick_p(1, 25), pick_l(2, 3), pick_d(1, 4), pick_f(1, 5);
    double worst = 0.0;
    std::size_t compared = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const Dims dims(pick_p(rng), pick_l(rng), pick_d(rng));
        auto [model, sample] = test_support::random_model_instance(dims, pick_f(rng), rng);
        const auto r = test_support::check_model_gradients(model, sample, 1.0);
        worst = std::max(worst, r.max_rel_err);
        compared += r.compared;
    }
    return {worst <= kModelFdTol && compared > 0,
            std::to_string(compared) + " entries, max rel err " + num(worst) + " (tol " + num(kModelFdTol) + ")"};
}

} // namespace

int main(int argc, char** argv)
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double time_limit_s;
    };
    const std::vector<Criterion> criteria{
        {"solver equivalence", solver_equivalence, 10},
        {"low-rank iteration bound", iteration_bound, 30},
        {"apply cost linear in D", apply_linearity, 60},
        {"gradient exactness", gradient_exactness, 120},
        {"scalar analytic case", scalar_case, 10},
        {"energy optimality and CG monotonicity", energy_optimality, 10},
        {"positive definiteness", positive_definiteness, 5},
        {"end-to-end learning benefit", learning_benefit, 600},
        {"end-to-end weight gradients", model_gradients, 120},
    };

    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > criteria[i].time_limit_s) {
            out.pass = false;
            out.detail += "; over the " + num(criteria[i].time_limit_s) + " s limit";
        }
        std::printf("[%s] %zu %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !out.pass;
    }
    return failed ? 1 : 0;
}
