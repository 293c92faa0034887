#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dgcrf/errors.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

using Labels = std::vector<std::size_t>;

struct LossReport {
    double loss = 0.0;
    Vector dl_dx;
    double pixel_accuracy = 0.0;
};

/// Mean per-pixel softmax cross-entropy over the label block of each pixel.
/// dl_dx is (softmax - onehot) / P. Ties in argmax go to the lowest label.
inline LossReport softmax_xent(const Vector& x, const Labels& truth, const Dims& dims)
{
    const std::size_t P = dims.pixels, L = dims.labels;
    if (x.size() != dims.variables()) throw ShapeError("softmax_xent: score length does not match P*L");
    if (truth.size() != P)
        throw ShapeError("softmax_xent: expected " + std::to_string(P) + " labels, got " +
                         std::to_string(truth.size()));

    LossReport out{0.0, Vector(x.size()), 0.0};
    std::size_t correct = 0;
    const double inv_p = 1.0 / static_cast<double>(P);
    for (std::size_t p = 0; p < P; ++p) {
        const std::size_t t = truth[p];
        if (t >= L)
            throw IndexError("softmax_xent: label " + std::to_string(t) + " at pixel " + std::to_string(p) +
                             " is outside [0, " + std::to_string(L) + ")");
        const std::size_t base = p * L;
        std::size_t argmax = 0;
        double top = x[base];
        for (std::size_t l = 1; l < L; ++l)
            if (x[base + l] > top) {
                top = x[base + l];
                argmax = l;
            }
        if (argmax == t) ++correct;

        double z = 0.0;
        for (std::size_t l = 0; l < L; ++l) z += std::exp(x[base + l] - top);
        const double log_z = std::log(z) + top;
        out.loss += (log_z - x[base + t]) * inv_p;
        for (std::size_t l = 0; l < L; ++l) {
            const double prob = std::exp(x[base + l] - log_z);
            out.dl_dx[base + l] = (prob - (l == t ? 1.0 : 0.0)) * inv_p;
        }
    }
    out.pixel_accuracy = static_cast<double>(correct) * inv_p;
    return out;
}

/// Per-pixel argmax of a score field.
inline Labels predict_labels(const Vector& x, const Dims& dims)
{
    Labels out(dims.pixels);
    for (std::size_t p = 0; p < dims.pixels; ++p) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < dims.labels; ++l)
            if (x[p * dims.labels + l] > x[p * dims.labels + best]) best = l;
        out[p] = best;
    }
    return out;
}

} // namespace dgcrf
