#pragma once

// Randomized oracle suite for the G-CRF layer: matrix-free vs explicit
// operator, CG vs dense solve, unary-gradient residual, efficient embedding
// gradient vs the literal Kronecker expression and vs finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dgcrf/cg.hpp"
#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/matrix_io.hpp"
#include "dgcrf/reference.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

// ---- random instances (shared with tests and the bench) ----

/// D x N matrix with entries N(0,1) * scale.
inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.span()) v = scale * normal(rng);
    return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(n);
    for (double& e : v.span()) e = scale * normal(rng);
    return v;
}

/// Embeddings drawn standard normal and scaled by 1/sqrt(N).
inline Matrix standard_embeddings(std::size_t d, std::size_t n, std::mt19937_64& rng)
{
    return random_matrix(d, n, rng, 1.0 / std::sqrt(static_cast<double>(n)));
}

// ---- the check suite ----

struct CheckRow {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct GradCheckSpec {
    Dims dims{8, 3, 4};
    double lambda = 1.0;
    CgConfig cg{};
    std::size_t instances = 25;
    std::uint64_t seed = 0;
    double fd_step = 1e-5;
    /// Negative control: replaces the embedding gradient with a formula that drops the -(Ex)g' term.
    bool sabotage = false;
};

inline constexpr double kOperatorTol = 1e-12;
inline constexpr double kSolverTol = 1e-8;
inline constexpr double kNaiveTol = 1e-10;
inline constexpr double kFiniteDiffTol = 1e-5;
inline constexpr double kFiniteDiffFloor = 1e-6;
inline constexpr double kKroneckerTol = 1e-12;
inline constexpr double kScalarTol = 1e-10;

/// Largest per-entry relative error |a - ref| / |ref| over entries with |ref| > floor.
inline double max_entry_rel_err(std::span<const double> a, std::span<const double> ref, double floor)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(ref[i]) > floor) worst = std::max(worst, std::abs(a[i] - ref[i]) / std::abs(ref[i]));
    return worst;
}

/// -(E g)x' only: the classic mistake of forgetting the symmetric half.
inline Matrix sabotaged_embedding_gradient(const Matrix& embeddings, const Vector& g, const Vector& x)
{
    Matrix out(embeddings.rows(), embeddings.cols());
    std::vector<double> eg(embeddings.rows());
    gemv(embeddings, g.span(), eg);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) = -eg[r] * x[j];
    return out;
}

namespace detail {

inline void record(CheckRow& row, double err)
{
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    row.max_rel_err = std::max(row.max_rel_err, err);
    row.pass = row.max_rel_err <= row.tolerance;
}

} // namespace detail

/// The D = 1, N = 1 instance a = 2, lambda = 1, B = 10, dL/dx = 5: x = 2, dL/dB = 1, dL/da = -8.
inline CheckRow scalar_case_check(bool sabotage = false)
{
    CheckRow row{"scalar_case", 0.0, kScalarTol, true};
    GcrfLayer layer(Dims(1, 1, 1), Matrix(1, 1, {2.0}), 1.0);
    auto fwd = forward(layer, Vector{10.0});
    auto grads = backward(layer, fwd.x, Vector{5.0});
    const double d_emb = sabotage ? sabotaged_embedding_gradient(layer.embeddings(), grads.d_unary, fwd.x)(0, 0)
                                  : grads.d_embeddings(0, 0);
    detail::record(row, std::abs(fwd.x[0] - 2.0) / 2.0);
    detail::record(row, std::abs(grads.d_unary[0] - 1.0));
    detail::record(row, std::abs(d_emb + 8.0) / 8.0);
    return row;
}

inline std::vector<CheckRow> run_grad_check(const GradCheckSpec& spec)
{
    const std::size_t n = spec.dims.variables(), d = spec.dims.embed_dim;
    if (n > reference::kMaxNaiveVariables || d > reference::kMaxNaiveEmbedDim)
        throw ConfigError("grad-check: instances must satisfy N <= " + std::to_string(reference::kMaxNaiveVariables) +
                          " and D <= " + std::to_string(reference::kMaxNaiveEmbedDim) + " (got N=" +
                          std::to_string(n) + ", D=" + std::to_string(d) + ")");
    if (spec.instances == 0) throw ConfigError("grad-check: instances must be positive");

    CheckRow op_row{"operator_vs_explicit", 0.0, kOperatorTol, true};
    CheckRow solve_row{"cg_vs_direct", 0.0, kSolverTol, true};
    CheckRow unary_row{"unary_grad_residual", 0.0, 1.0, true}; // ratio residual / CG threshold
    CheckRow naive_row{"embedding_vs_naive_kronecker", 0.0, kNaiveTol, true};
    CheckRow fd_row{"embedding_vs_finite_diff", 0.0, kFiniteDiffTol, true};
    CheckRow kron_row{"kronecker_contraction", 0.0, kKroneckerTol, true};
    CheckRow perm_row{"commutation_matrix", 0.0, 0.0, true};

    std::mt19937_64 rng(spec.seed);
    for (std::size_t inst = 0; inst < spec.instances; ++inst) {
        GcrfLayer layer(spec.dims, standard_embeddings(d, n, rng), spec.lambda, spec.cg);
        const Vector unary = random_vector(n, rng);
        const Vector dl_dx = random_vector(n, rng);

        const Matrix dense = reference::assemble_dense(layer);
        for (int k = 0; k < 4; ++k) {
            const Vector v = random_vector(n, rng);
            Vector mv(n);
            gemv(dense, v.span(), mv.span());
            detail::record(op_row, max_rel_diff(operator_apply(layer, v).span(), mv.span()));
        }

        const auto fwd = forward(layer, unary);
        const Vector direct = reference::direct_solve({dense, unary});
        detail::record(solve_row, norm2(fwd.x - direct) / norm2(direct));

        const auto grads = backward(layer, fwd.x, dl_dx);
        const double threshold = std::max(spec.cg.rel_tol * norm2(dl_dx), spec.cg.abs_tol);
        detail::record(unary_row, norm2(operator_apply(layer, grads.d_unary) - dl_dx) / threshold);

        const Matrix efficient = spec.sabotage
                                     ? sabotaged_embedding_gradient(layer.embeddings(), grads.d_unary, fwd.x)
                                     : grads.d_embeddings;
        const Matrix naive = reference::dlda_embedding_naive(layer.embeddings(), grads.d_unary, fwd.x);
        detail::record(naive_row, max_rel_diff(efficient.span(), naive.span()));

        const Matrix fd = reference::finite_diff_embedding_grad(layer, unary, dl_dx, spec.fd_step);
        detail::record(fd_row, max_entry_rel_err(efficient.span(), fd.span(), kFiniteDiffFloor));

        // E (G + G') with G = dlda_kronecker(g, x)
        const Matrix g_mat = reference::dlda_kronecker(grads.d_unary, fwd.x);
        Matrix contracted(d, n);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += layer.embeddings()(r, i) * (g_mat(i, j) + g_mat(j, i));
                contracted(r, j) = s;
            }
        detail::record(kron_row, max_rel_diff(contracted.span(), efficient.span()));

        // T_{m,n} vec(M) == vec(M') for a random m x n matrix
        std::uniform_int_distribution<std::size_t> dim(1, 10);
        const Matrix m = random_matrix(dim(rng), dim(rng), rng);
        const reference::PermutationMatrix t(m.rows(), m.cols());
        const auto permuted = t.apply(reference::vec(m));
        const auto expected = reference::vec(m.transposed());
        detail::record(perm_row, permuted == expected ? 0.0 : 1.0);
    }

    return {op_row, solve_row, unary_row, naive_row, fd_row, kron_row, perm_row, scalar_case_check(spec.sabotage)};
}

inline void write_check_csv(std::ostream& out, const std::vector<CheckRow>& rows)
{
    out << "name,max_rel_err,tolerance,pass\n";
    for (const auto& r : rows) {
        std::string line = r.name + ",";
        detail::append_shortest(line, r.max_rel_err);
        line += ',';
        detail::append_shortest(line, r.tolerance);
        line += r.pass ? ",1\n" : ",0\n";
        out << line;
    }
}

} // namespace dgcrf
