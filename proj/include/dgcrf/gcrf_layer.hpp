#pragma once

// Fully-connected low-rank Gaussian CRF layer.
//
// The pairwise (precision) matrix over the N = P*L pixel-label variables is
// A = E'E for a D x N embedding matrix E, so the energy
//
//     E(x) = 0.5 x'(E'E + lambda I)x - B'x
//
// is strictly convex for any lambda > 0 and its minimizer solves
// (E'E + lambda I)x = B. Everything here works with E directly; the N x N
// matrix is never formed.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dgcrf/cg.hpp"
#include "dgcrf/errors.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

/// v -> E'(E v) + lambda v, with E borrowed. Satisfies SpdOperator.
class GcrfOperator {
  public:
    GcrfOperator(const Matrix& embeddings, double lambda) : emb_(&embeddings), lambda_(lambda) {}

    std::size_t dim() const { return emb_->cols(); }
    std::size_t embed_dim() const { return emb_->rows(); }
    double lambda() const { return lambda_; }

    void apply(std::span<const double> in, std::span<double> out) const
    {
        std::vector<double> projected(emb_->rows());
        gemv(*emb_, in, projected);
        gemv_t(*emb_, projected, out);
        axpy(lambda_, in, out);
    }

  private:
    const Matrix* emb_;
    double lambda_;
};

static_assert(SpdOperator<GcrfOperator>);

struct LayerGradients {
    Vector d_unary;       // dL/dB, length N
    Matrix d_embeddings;  // dL/dE, D x N
    CgReport solve_report;
};

struct ForwardResult {
    Vector x;
    CgReport report;
};

class GcrfLayer {
  public:
    GcrfLayer(Dims dims, Matrix embeddings, double lambda, CgConfig cg = {})
        : dims_(dims), embeddings_(std::move(embeddings)), lambda_(lambda), cg_(cg)
    {
        if (embeddings_.rows() != dims_.embed_dim || embeddings_.cols() != dims_.variables())
            throw ShapeError("GcrfLayer: embeddings are " + std::to_string(embeddings_.rows()) + "x" +
                             std::to_string(embeddings_.cols()) + ", dims require " +
                             std::to_string(dims_.embed_dim) + "x" + std::to_string(dims_.variables()));
        if (!(lambda_ > 0.0) || !std::isfinite(lambda_))
            throw ConfigError("GcrfLayer: lambda must be a positive finite number");
        if (!embeddings_.all_finite()) throw NumericError("GcrfLayer: embeddings contain NaN/Inf");
        cg_.validate();
    }

    /// Layer with all-zero embeddings, i.e. no pairwise coupling.
    static GcrfLayer unary_only(Dims dims, double lambda, CgConfig cg = {})
    {
        return GcrfLayer(dims, Matrix(dims.embed_dim, dims.variables()), lambda, cg);
    }

    const Dims& dims() const { return dims_; }
    const Matrix& embeddings() const { return embeddings_; }
    double lambda() const { return lambda_; }
    const CgConfig& cg_config() const { return cg_; }
    std::size_t variables() const { return dims_.variables(); }

    GcrfOperator op() const { return GcrfOperator(embeddings_, lambda_); }

    GcrfLayer with_embeddings(Matrix embeddings) const { return GcrfLayer(dims_, std::move(embeddings), lambda_, cg_); }

  private:
    Dims dims_;
    Matrix embeddings_;
    double lambda_;
    CgConfig cg_;
};

namespace detail {

inline void require_len(const Vector& v, std::size_t n, const char* what)
{
    if (v.size() != n)
        throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
}

} // namespace detail

/// (E'E + lambda I) v
inline Vector operator_apply(const GcrfLayer& layer, const Vector& v)
{
    detail::require_len(v, layer.variables(), "operator_apply");
    Vector out(v.size());
    layer.op().apply(v.span(), out.span());
    return out;
}

/// 0.5(|Ex|^2 + lambda|x|^2) - B'x
inline double energy(const GcrfLayer& layer, const Vector& x, const Vector& unary)
{
    detail::require_len(x, layer.variables(), "energy(x)");
    detail::require_len(unary, layer.variables(), "energy(B)");
    std::vector<double> ex(layer.dims().embed_dim);
    gemv(layer.embeddings(), x.span(), ex);
    return 0.5 * (dot(ex, ex) + layer.lambda() * dot(x, x)) - dot(unary, x);
}

/// MAP inference: the unique minimizer of the energy.
inline ForwardResult forward(const GcrfLayer& layer, const Vector& unary)
{
    detail::require_len(unary, layer.variables(), "forward");
    auto [x, report] = cg_solve(layer.op(), unary, layer.cg_config());
    return {std::move(x), std::move(report)};
}

/// dL/dE = -(E g)x' - (E x)g', the contraction of the symmetrized dL/dA = -g x' with E.
inline Matrix embedding_gradient(const Matrix& embeddings, const Vector& g, const Vector& x)
{
    const std::size_t d = embeddings.rows(), n = embeddings.cols();
    std::vector<double> eg(d), ex(d);
    gemv(embeddings, g.span(), eg);
    gemv(embeddings, x.span(), ex);
    Matrix out(d, n);
    for (std::size_t r = 0; r < d; ++r) {
        auto row = out.row(r);
        for (std::size_t j = 0; j < n; ++j) row[j] = -eg[r] * x[j] - ex[r] * g[j];
    }
    return out;
}

struct BackwardOptions {
    /// Re-check that x solves the forward system before using it.
    bool verify_forward = false;
    const Vector* unary = nullptr; // required when verify_forward is set
};

/// Gradients w.r.t. the unary terms and the embeddings given dL/dx at the forward solution x.
/// One extra CG solve with the forward operator: (E'E + lambda I) dL/dB = dL/dx.
inline LayerGradients backward(const GcrfLayer& layer, const Vector& x, const Vector& dl_dx,
                               const BackwardOptions& opts = {})
{
    const std::size_t n = layer.variables();
    detail::require_len(x, n, "backward(x)");
    detail::require_len(dl_dx, n, "backward(dL/dx)");
    if (opts.verify_forward) {
        if (!opts.unary) throw ConfigError("backward: verify_forward requires the unary terms");
        Vector resid = operator_apply(layer, x) - *opts.unary;
        double tol = std::max(layer.cg_config().rel_tol * norm2(*opts.unary), layer.cg_config().abs_tol);
        // Recurrence and true residuals drift apart by a few ulps times the condition number.
        if (norm2(resid) > 10.0 * tol + 1e-12 * norm2(*opts.unary))
            throw NumericError("backward: x is not the forward solution (residual " + std::to_string(norm2(resid)) +
                               ")");
    }
    auto [g, report] = cg_solve(layer.op(), dl_dx, layer.cg_config());
    Matrix d_emb = embedding_gradient(layer.embeddings(), g, x);
    return {std::move(g), std::move(d_emb), std::move(report)};
}

} // namespace dgcrf
