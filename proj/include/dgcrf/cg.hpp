#pragma once

// Conjugate gradients for symmetric positive-definite operators that are only
// available through their action on vectors.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgcrf/errors.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

/// A square linear map y = Op(x) that the caller promises is symmetric positive definite.
template <typename Op>
concept SpdOperator = requires(const Op& op, std::span<const double> in, std::span<double> out) {
    { op.dim() } -> std::convertible_to<std::size_t>;
    op.apply(in, out);
};

/// Type-erased operator, handy for tests and ad-hoc systems.
class FunctionOperator {
  public:
    using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

    FunctionOperator(std::size_t dim, ApplyFn fn) : dim_(dim), fn_(std::move(fn)) {}

    std::size_t dim() const { return dim_; }
    void apply(std::span<const double> in, std::span<double> out) const { fn_(in, out); }

  private:
    std::size_t dim_;
    ApplyFn fn_;
};

/// Operator backed by an explicit dense square matrix.
class DenseOperator {
  public:
    explicit DenseOperator(Matrix m) : m_(std::move(m))
    {
        if (m_.rows() != m_.cols()) throw ShapeError("DenseOperator: matrix must be square");
    }
    std::size_t dim() const { return m_.rows(); }
    void apply(std::span<const double> in, std::span<double> out) const { gemv(m_, in, out); }
    const Matrix& matrix() const { return m_; }

  private:
    Matrix m_;
};

struct CgConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    /// 0 selects 10 * N.
    std::size_t max_iters = 0;
    bool record_energy = false;

    std::size_t effective_max_iters(std::size_t n) const { return max_iters ? max_iters : 10 * n; }

    void validate() const
    {
        if (!(rel_tol > 0.0) || !std::isfinite(rel_tol)) throw ConfigError("cg.rel_tol must be > 0");
        if (!(abs_tol >= 0.0) || !std::isfinite(abs_tol)) throw ConfigError("cg.abs_tol must be >= 0");
    }
};

struct CgReport {
    std::size_t iterations = 0;
    double final_residual_norm = 0.0;
    double threshold = 0.0;
    bool converged = false;
    /// E(x_k) = 0.5 x_k'Op(x_k) - b'x_k for k = 0..iterations; empty unless requested.
    std::vector<double> energy_trace;
};

struct CgResult {
    Vector x;
    CgReport report;
};

namespace detail {

template <SpdOperator Op>
double quadratic_energy(const Op& op, std::span<const double> b, std::span<const double> x, std::vector<double>& work)
{
    op.apply(x, work);
    return 0.5 * dot(x, work) - dot(b, x);
}

} // namespace detail

/// Solves Op x = b. Stops once the recurrence residual drops to max(rel_tol*|b|, abs_tol).
/// Non-convergence is reported, not thrown: the lowest-residual iterate is returned.
template <SpdOperator Op>
CgResult cg_solve(const Op& op, const Vector& b, const CgConfig& cfg = {}, const std::optional<Vector>& x0 = {})
{
    cfg.validate();
    const std::size_t n = op.dim();
    if (b.size() != n)
        throw ShapeError("cg_solve: rhs has length " + std::to_string(b.size()) + ", operator dim is " +
                         std::to_string(n));
    if (x0 && x0->size() != n) throw ShapeError("cg_solve: initial guess has wrong length");

    CgResult result{x0 ? *x0 : Vector(n), {}};
    CgReport& report = result.report;
    std::span<double> x = result.x.span();

    std::vector<double> r(b.values());
    std::vector<double> ap(n, 0.0);
    std::vector<double> work;
    if (cfg.record_energy) work.resize(n);

    if (x0) {
        op.apply(x, ap);
        for (std::size_t i = 0; i < n; ++i) r[i] -= ap[i];
    }
    std::vector<double> p(r);

    double rr = dot(r, r);
    report.threshold = std::max(cfg.rel_tol * norm2(b), cfg.abs_tol);
    report.final_residual_norm = std::sqrt(rr);
    if (cfg.record_energy) report.energy_trace.push_back(detail::quadratic_energy(op, b.span(), x, work));
    if (report.final_residual_norm <= report.threshold) {
        report.converged = true;
        return result;
    }

    std::vector<double> best_x(x.begin(), x.end());
    double best_rr = rr;

    const std::size_t max_iters = cfg.effective_max_iters(n);
    for (std::size_t k = 1; k <= max_iters; ++k) {
        op.apply(p, ap);
        const double pap = dot(p, ap);
        if (!std::isfinite(pap))
            throw NumericError("cg_solve: non-finite curvature p'Ap at iteration " + std::to_string(k));
        if (pap <= 0.0)
            throw DefinitenessError("cg_solve: non-positive curvature p'Ap = " + std::to_string(pap) +
                                    " at iteration " + std::to_string(k) + "; operator is not positive definite");
        const double alpha = rr / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        const double rr_next = dot(r, r);
        if (!std::isfinite(alpha) || !std::isfinite(rr_next))
            throw NumericError("cg_solve: NaN/Inf in iterate at iteration " + std::to_string(k));

        report.iterations = k;
        report.final_residual_norm = std::sqrt(rr_next);
        if (cfg.record_energy) report.energy_trace.push_back(detail::quadratic_energy(op, b.span(), x, work));
        if (report.final_residual_norm <= report.threshold) {
            report.converged = true;
            return result;
        }
        if (rr_next < best_rr) {
            best_rr = rr_next;
            std::copy(x.begin(), x.end(), best_x.begin());
        }

        const double beta = rr_next / rr;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_next;
    }

    std::copy(best_x.begin(), best_x.end(), x.begin());
    report.final_residual_norm = std::sqrt(best_rr);
    return result;
}

} // namespace dgcrf
