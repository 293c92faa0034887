#pragma once

// Brute-force reference computations for the G-CRF layer. Deliberately naive:
// explicit N x N systems, a dense Cholesky solve, the literal Kronecker /
// commutation-matrix form of the embedding gradient, and finite differences.
// Only tests and the grad-check tool use this header.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dgcrf/errors.hpp"
#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf::reference {

inline constexpr std::size_t kMaxDenseVariables = 4096;
inline constexpr std::size_t kMaxKroneckerVariables = 50;
inline constexpr std::size_t kMaxNaiveVariables = 40;
inline constexpr std::size_t kMaxNaiveEmbedDim = 6;
inline constexpr std::size_t kMaxDensePermutation = 2500;

struct ExplicitSystem {
    Matrix m;  // N x N, symmetric positive definite
    Vector b;  // N
};

/// M = E'E + lambda I. M[i][j] = column_i . column_j + lambda [i == j].
inline Matrix assemble_dense(const Matrix& embeddings, double lambda)
{
    const std::size_t n = embeddings.cols(), d = embeddings.rows();
    if (n > kMaxDenseVariables)
        throw SizeGuardError("assemble_dense: N=" + std::to_string(n) + " exceeds " +
                             std::to_string(kMaxDenseVariables) +
                             "; use the matrix-free operator (operator_apply / forward) instead");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += embeddings(r, i) * embeddings(r, j);
            if (i == j) s += lambda;
            m(i, j) = s;
            m(j, i) = s;
        }
    return m;
}

inline Matrix assemble_dense(const GcrfLayer& layer) { return assemble_dense(layer.embeddings(), layer.lambda()); }

/// A + lambda I for an arbitrary symmetric pairwise matrix A.
inline Matrix assemble_explicit(const Matrix& pairwise, double lambda)
{
    if (pairwise.rows() != pairwise.cols()) throw ShapeError("assemble_explicit: pairwise matrix must be square");
    if (pairwise.rows() > kMaxDenseVariables) throw SizeGuardError("assemble_explicit: matrix too large");
    Matrix m = pairwise;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12)
                throw ShapeError("assemble_explicit: pairwise matrix is not symmetric");
        m(i, i) += lambda;
    }
    return m;
}

/// Dense Cholesky solve of M x = b.
inline Vector direct_solve(const ExplicitSystem& sys)
{
    const std::size_t n = sys.m.rows();
    if (sys.m.cols() != n || sys.b.size() != n) throw ShapeError("direct_solve: inconsistent system shapes");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        sys.m.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::Map<const Eigen::VectorXd> b(sys.b.values().data(), static_cast<Eigen::Index>(n));
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw DefinitenessError("direct_solve: Cholesky factorization failed; matrix is not positive definite");
    Eigen::VectorXd x = llt.solve(b);
    return Vector(std::vector<double>(x.data(), x.data() + x.size()));
}

/// dL/dA = -(dL/dB) (x) x, laid out as the N x N matrix with entries -g_i x_j.
inline Matrix dlda_kronecker(const Vector& g, const Vector& x)
{
    const std::size_t n = g.size();
    if (x.size() != n) throw ShapeError("dlda_kronecker: length mismatch");
    if (n > kMaxKroneckerVariables)
        throw SizeGuardError("dlda_kronecker: N=" + std::to_string(n) + " exceeds " +
                             std::to_string(kMaxKroneckerVariables));
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = -g[i] * x[j];
    return out;
}

/// Commutation matrix T_{m,n}: T vec(M) = vec(M') for every m x n matrix M,
/// where vec stacks columns. Stored as an index map: row k of T has its single
/// one in column source(k).
class PermutationMatrix {
  public:
    PermutationMatrix(std::size_t m, std::size_t n) : m_(m), n_(n), source_(m * n), target_(m * n)
    {
        // vec(M)[i + j m] = M(i,j) = vec(M')[j + i n]
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                source_[j + i * n] = i + j * m;
                target_[i + j * m] = j + i * n;
            }
    }

    std::size_t size() const { return m_ * n_; }
    std::size_t source(std::size_t row) const { return source_[row]; }
    /// Row holding the one in column `col`.
    std::size_t target(std::size_t col) const { return target_[col]; }
    double entry(std::size_t row, std::size_t col) const { return source_[row] == col ? 1.0 : 0.0; }

    std::vector<double> apply(std::span<const double> v) const
    {
        if (v.size() != size()) throw ShapeError("PermutationMatrix::apply: length mismatch");
        std::vector<double> out(v.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[source_[k]];
        return out;
    }

    Matrix dense() const
    {
        if (size() > kMaxDensePermutation)
            throw SizeGuardError("PermutationMatrix::dense: mn=" + std::to_string(size()) + " exceeds " +
                                 std::to_string(kMaxDensePermutation));
        Matrix t(size(), size());
        for (std::size_t k = 0; k < size(); ++k) t(k, source_[k]) = 1.0;
        return t;
    }

  private:
    std::size_t m_, n_;
    std::vector<std::size_t> source_, target_;
};

/// Column-stacking vectorization.
inline std::vector<double> vec(const Matrix& m)
{
    std::vector<double> out(m.size());
    for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) out[i + j * m.rows()] = m(i, j);
    return out;
}

namespace detail {

// Entry (row, col) of P (x) Q where P is p_rows x p_cols and Q is q_rows x q_cols,
// both given as entry functions.
template <typename PEntry, typename QEntry>
double kron_entry(PEntry p, QEntry q, std::size_t q_rows, std::size_t q_cols, std::size_t row, std::size_t col)
{
    return p(row / q_rows, col / q_cols) * q(row % q_rows, col % q_cols);
}

} // namespace detail

/// Literal evaluation of
///   dL/dE = -(g (x) x) [ (I_N (x) E') + (E' (x) I_N) T_{D,N} ]
/// as a 1 x DN row, reshaped from vec-order back to D x N. Every Kronecker and
/// permutation entry is produced by index arithmetic.
inline Matrix dlda_embedding_naive(const Matrix& embeddings, const Vector& g, const Vector& x)
{
    const std::size_t d = embeddings.rows(), n = embeddings.cols();
    if (g.size() != n || x.size() != n) throw ShapeError("dlda_embedding_naive: length mismatch");
    if (n > kMaxNaiveVariables || d > kMaxNaiveEmbedDim)
        throw SizeGuardError("dlda_embedding_naive: requires N <= " + std::to_string(kMaxNaiveVariables) +
                             " and D <= " + std::to_string(kMaxNaiveEmbedDim));

    auto identity = [](std::size_t i, std::size_t j) { return i == j ? 1.0 : 0.0; };
    auto emb_t = [&](std::size_t i, std::size_t j) { return embeddings(j, i); }; // E' is N x D
    const PermutationMatrix t(d, n);

    // Row vector -(g (x) x), length N^2.
    std::vector<double> lhs(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lhs[i * n + j] = -g[i] * x[j];

    // (I_N (x) E') is N^2 x ND; (E' (x) I_N) is N^2 x DN; T_{D,N} is DN x DN.
    std::vector<double> row(d * n, 0.0);
    for (std::size_t c = 0; c < d * n; ++c) {
        // Right-multiplying by T picks column t.target(c) of (E' (x) I_N).
        const std::size_t permuted = t.target(c);
        double s = 0.0;
        for (std::size_t k = 0; k < n * n; ++k) {
            const double jac = detail::kron_entry(identity, emb_t, n, d, k, c) +
                               detail::kron_entry(emb_t, identity, n, n, k, permuted);
            s += lhs[k] * jac;
        }
        row[c] = s;
    }

    Matrix out(d, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < d; ++i) out(i, j) = row[i + j * d];
    return out;
}

/// Central differences of the probe loss L(E) = dl_dx . forward(B) w.r.t. each entry of E.
inline Matrix finite_diff_embedding_grad(const GcrfLayer& layer, const Vector& unary, const Vector& dl_dx,
                                         double step = 1e-5)
{
    if (!(step > 0.0)) throw ConfigError("finite_diff_embedding_grad: step must be positive");
    const std::size_t d = layer.dims().embed_dim, n = layer.variables();
    if (unary.size() != n || dl_dx.size() != n) throw ShapeError("finite_diff_embedding_grad: length mismatch");

    CgConfig tight = layer.cg_config();
    tight.rel_tol = std::min(tight.rel_tol, 1e-15);
    tight.abs_tol = 0.0;
    tight.max_iters = std::max<std::size_t>(tight.effective_max_iters(n), 20 * n);
    tight.record_energy = false;

    auto probe = [&](const Matrix& emb) {
        GcrfLayer probe_layer(layer.dims(), emb, layer.lambda(), tight);
        auto [x, report] = forward(probe_layer, unary);
        if (!report.converged)
            throw OracleError("finite_diff_embedding_grad: probe solve did not converge (residual " +
                              std::to_string(report.final_residual_norm) + ")");
        return dot(dl_dx, x);
    };

    Matrix grad(d, n);
    Matrix emb = layer.embeddings();
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t j = 0; j < n; ++j) {
            const double saved = emb(r, j);
            emb(r, j) = saved + step;
            const double up = probe(emb);
            emb(r, j) = saved - step;
            const double down = probe(emb);
            emb(r, j) = saved;
            grad(r, j) = (up - down) / (2.0 * step);
        }
    return grad;
}

} // namespace dgcrf::reference
