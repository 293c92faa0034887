#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgcrf/errors.hpp"

namespace dgcrf {

/// Problem dimensions: P pixels, L labels, N = P*L variables, D embedding size.
struct Dims {
    std::size_t pixels = 1;
    std::size_t labels = 1;
    std::size_t embed_dim = 1;

    Dims() = default;
    Dims(std::size_t p, std::size_t l, std::size_t d) : pixels(p), labels(l), embed_dim(d)
    {
        if (p == 0 || l == 0 || d == 0)
            throw ShapeError("Dims: pixels, labels and embed_dim must be positive (got P=" +
                             std::to_string(p) + " L=" + std::to_string(l) +
                             " D=" + std::to_string(d) + ")");
    }

    std::size_t variables() const { return pixels * labels; }

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Variable index of (pixel, label). Labels are contiguous within a pixel.
inline std::size_t flat_index(std::size_t pixel, std::size_t label, const Dims& dims)
{
    if (pixel >= dims.pixels || label >= dims.labels)
        throw IndexError("flat_index: (p=" + std::to_string(pixel) + ", l=" + std::to_string(label) +
                         ") outside P=" + std::to_string(dims.pixels) +
                         ", L=" + std::to_string(dims.labels));
    return pixel * dims.labels + label;
}

namespace detail {

inline void require_finite(std::span<const double> data, const char* what)
{
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!std::isfinite(data[i]))
            throw NumericError(std::string(what) + ": non-finite entry at position " + std::to_string(i));
}

} // namespace detail

/// Dense vector of doubles. Entries are finite on construction.
class Vector {
  public:
    Vector() = default;
    explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill)
    {
        detail::require_finite(data_, "Vector");
    }
    explicit Vector(std::vector<double> data) : data_(std::move(data))
    {
        detail::require_finite(data_, "Vector");
    }
    Vector(std::initializer_list<double> init) : data_(init) { detail::require_finite(data_, "Vector"); }

    std::size_t size() const { return data_.size(); }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    std::span<const double> span() const { return data_; }
    std::span<double> span() { return data_; }
    const std::vector<double>& values() const { return data_; }

    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    bool all_finite() const
    {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Vector&, const Vector&) = default;

  private:
    std::vector<double> data_;
};

/// Dense row-major matrix of doubles. Entries are finite on construction.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for a " +
                             std::to_string(rows_) + "x" + std::to_string(cols_) + " matrix");
        detail::require_finite(data_, "Matrix");
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> span() const { return data_; }
    std::span<double> span() { return data_; }
    const std::vector<double>& values() const { return data_; }

    Matrix transposed() const
    {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    bool all_finite() const
    {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---- small BLAS-1/2 kernels over spans ----

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// out = M * v
inline void gemv(const Matrix& m, std::span<const double> v, std::span<double> out)
{
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v);
}

// out = M^T * v, streaming over rows so M is read contiguously.
inline void gemv_t(const Matrix& m, std::span<const double> v, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) axpy(v[r], m.row(r), out);
}

inline Vector operator-(const Vector& a, const Vector& b)
{
    if (a.size() != b.size()) throw ShapeError("Vector subtraction: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vector operator+(const Vector& a, const Vector& b)
{
    if (a.size() != b.size()) throw ShapeError("Vector addition: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline double norm2(const Vector& v) { return norm2(v.span()); }
inline double dot(const Vector& a, const Vector& b) { return dot(a.span(), b.span()); }

/// max_ij |a_ij - b_ij| / max(max_ij |b_ij|, floor)
inline double max_rel_diff(std::span<const double> a, std::span<const double> b, double floor = 1e-300)
{
    if (a.size() != b.size()) throw ShapeError("max_rel_diff: size mismatch");
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / std::max(scale, floor);
}

} // namespace dgcrf
