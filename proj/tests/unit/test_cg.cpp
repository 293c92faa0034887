#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dgcrf/cg.hpp"
#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/grad_check.hpp"
#include "dgcrf/reference.hpp"

using namespace dgcrf;

namespace {

DenseOperator two_by_two() { return DenseOperator(Matrix(2, 2, {2, 1, 1, 2})); }

} // namespace

TEST(CgSolve, IdentitySystemConvergesInOneStep)
{
    std::mt19937_64 rng(1);
    const Vector b = random_vector(17, rng);
    GcrfLayer layer = GcrfLayer::unary_only(Dims(17, 1, 3), 1.0);
    const auto [x, report] = cg_solve(layer.op(), b);
    EXPECT_TRUE(report.converged);
    EXPECT_LE(report.iterations, 1u);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_DOUBLE_EQ(x[i], b[i]);
}

TEST(CgSolve, HandSolvableTwoByTwo)
{
    const auto [x, report] = cg_solve(two_by_two(), Vector{3, 3});
    EXPECT_TRUE(report.converged);
    EXPECT_NEAR(x[0], 1.0, 1e-12);
    EXPECT_NEAR(x[1], 1.0, 1e-12);
}

TEST(CgSolve, ZeroRhsReturnsZeroWithoutIterating)
{
    const auto [x, report] = cg_solve(two_by_two(), Vector{0, 0});
    EXPECT_TRUE(report.converged);
    EXPECT_EQ(report.iterations, 0u);
    EXPECT_EQ(x, (Vector{0, 0}));
}

TEST(CgSolve, LowRankConvergesWithinDPlusTwo)
{
    std::mt19937_64 rng(2024);
    const std::size_t n = 200, d = 8;
    GcrfLayer layer(Dims(n, 1, d), standard_embeddings(d, n, rng), 1.0);
    const Vector b = random_vector(n, rng);
    const auto [x, report] = cg_solve(layer.op(), b);
    ASSERT_TRUE(report.converged);
    EXPECT_LE(report.iterations, d + 2);
    EXPECT_LE(report.final_residual_norm, 1e-10 * norm2(b));
    const Vector direct = reference::direct_solve({reference::assemble_dense(layer), b});
    EXPECT_LE(norm2(x - direct) / norm2(direct), 1e-8);
}

TEST(CgSolve, LowRankIterationBoundProperty)
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> pick_n(16, 512), pick_r(1, 32);
    CgConfig cfg;
    cfg.rel_tol = 1e-8;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = pick_n(rng), r = std::min(pick_r(rng), n);
        GcrfLayer layer(Dims(n, 1, r), standard_embeddings(r, n, rng), 1.0, cfg);
        const Vector b = random_vector(n, rng);
        const auto res = forward(layer, b);
        ASSERT_TRUE(res.report.converged) << "N=" << n << " r=" << r;
        EXPECT_LE(res.report.iterations, r + 2) << "N=" << n << " r=" << r;
    }
}

TEST(CgSolve, EnergyTraceIsMonotone)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 60, d = 12;
        CgConfig cfg;
        cfg.record_energy = true;
        cfg.rel_tol = 1e-14;
        GcrfLayer layer(Dims(n, 1, d), random_matrix(d, n, rng), 0.5, cfg);
        const Vector b = random_vector(n, rng);
        const auto res = forward(layer, b);
        const auto& trace = res.report.energy_trace;
        ASSERT_EQ(trace.size(), res.report.iterations + 1);
        EXPECT_EQ(trace.front(), 0.0);
        for (std::size_t k = 1; k < trace.size(); ++k)
            EXPECT_LE(trace[k], trace[k - 1] + 4 * std::numeric_limits<double>::epsilon() * std::abs(trace[k - 1])) << "step " << k;
        EXPECT_NEAR(trace.back(), energy(layer, res.x, b), 1e-10 * std::abs(trace.back()));
    }
}

TEST(CgSolve, Deterministic)
{
    std::mt19937_64 rng(9);
    GcrfLayer layer(Dims(128, 1, 6), standard_embeddings(6, 128, rng), 1.0);
    const Vector b = random_vector(128, rng);
    const auto a = forward(layer, b);
    const auto c = forward(layer, b);
    EXPECT_EQ(a.x, c.x);
    EXPECT_EQ(a.report.iterations, c.report.iterations);
}

TEST(CgSolve, NonConvergenceIsFlaggedNotThrown)
{
    std::mt19937_64 rng(3);
    CgConfig cfg;
    cfg.max_iters = 2;
    GcrfLayer layer(Dims(50, 1, 10), random_matrix(10, 50, rng), 1.0, cfg);
    const Vector b = random_vector(50, rng);
    const auto res = forward(layer, b);
    EXPECT_FALSE(res.report.converged);
    EXPECT_EQ(res.report.iterations, 2u);
    EXPECT_GT(res.report.final_residual_norm, res.report.threshold);
    // The best iterate is reported with its residual.
    const double resid = norm2(operator_apply(layer, res.x) - b);
    EXPECT_NEAR(resid, res.report.final_residual_norm, 1e-8 * norm2(b));
    EXPECT_LE(resid, norm2(b) * (1 + 1e-12));
}

TEST(CgSolve, WarmStartFromSolutionNeedsNoIterations)
{
    const auto [x, report] = cg_solve(two_by_two(), Vector{3, 3}, {}, Vector{1, 1});
    EXPECT_TRUE(report.converged);
    EXPECT_EQ(report.iterations, 0u);
    EXPECT_EQ(x, (Vector{1, 1}));
}

TEST(CgSolve, NanInIterateIsANumericError)
{
    FunctionOperator bad(3, [](std::span<const double> in, std::span<double> out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i];
        out[1] = std::numeric_limits<double>::quiet_NaN();
    });
    try {
        cg_solve(bad, Vector{1, 2, 3});
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
    }
}

TEST(CgSolve, IndefiniteOperatorIsDetected)
{
    DenseOperator indefinite(Matrix(2, 2, {1, 0, 0, -1}));
    EXPECT_THROW(cg_solve(indefinite, Vector{0, 1}), DefinitenessError);
}

TEST(CgSolve, ShapeAndConfigErrors)
{
    EXPECT_THROW(cg_solve(two_by_two(), Vector{1, 2, 3}), ShapeError);
    EXPECT_THROW(cg_solve(two_by_two(), Vector{1, 2}, {}, Vector{1}), ShapeError);
    CgConfig bad;
    bad.rel_tol = 0.0;
    EXPECT_THROW(cg_solve(two_by_two(), Vector{1, 2}, bad), ConfigError);
}

TEST(CgSolve, TinyRhsUsesAbsoluteFloor)
{
    CgConfig cfg;
    cfg.abs_tol = 1e-3;
    const auto [x, report] = cg_solve(two_by_two(), Vector{1e-6, 0}, cfg);
    EXPECT_TRUE(report.converged);
    EXPECT_EQ(report.iterations, 0u);
    EXPECT_DOUBLE_EQ(report.threshold, 1e-3);
}
