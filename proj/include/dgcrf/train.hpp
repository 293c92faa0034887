#pragma once

// Two-phase piecewise training of a ToyModel with plain SGD and polynomial
// learning-rate decay:
//   phase 1: W_unary only, embeddings frozen at zero (x = B / lambda);
//   phase 2: W_embed only, W_unary frozen (unless joint fine-tuning is enabled).

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dgcrf/cg.hpp"
#include "dgcrf/errors.hpp"
#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/loss.hpp"
#include "dgcrf/matrix_io.hpp"
#include "dgcrf/synth.hpp"
#include "dgcrf/toy_model.hpp"

namespace dgcrf {

struct TrainConfig {
    double base_lr_unary = 1e-2;
    double base_lr_pairwise = 2.5e-3;
    double poly_power = 0.9;
    std::size_t iters_per_phase = 2000;
    std::size_t batch_size = 4;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    /// Std-dev of the random W_embed initialization at the start of phase 2.
    /// Embedding gradients vanish identically at E = 0, so phase 2 cannot start there.
    double embed_init_scale = 0.1;
    /// Also update W_unary during phase 2.
    bool joint_finetune = false;

    /// Learning rates used for the full-size network (unary 1e-3, pairwise 2.5e-4).
    static TrainConfig network_scale_preset()
    {
        TrainConfig c;
        c.base_lr_unary = 1e-3;
        c.base_lr_pairwise = 2.5e-4;
        return c;
    }

    void validate() const
    {
        if (!(base_lr_unary > 0.0) || !(base_lr_pairwise > 0.0))
            throw ConfigError("train: learning rates must be positive");
        if (!(poly_power > 0.0 && poly_power <= 1.0)) throw ConfigError("train: poly_power must lie in (0, 1]");
        if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
        if (!(lambda > 0.0)) throw ConfigError("train: lambda must be positive");
        if (!(embed_init_scale >= 0.0)) throw ConfigError("train: embed_init_scale must be >= 0");
    }
};

/// base * (1 - t/T)^power
inline double poly_lr(double base, std::size_t t, std::size_t total, double power)
{
    if (total == 0) return base;
    return base * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(total), power);
}

struct HistoryRow {
    std::size_t iter = 0;
    int phase = 1;
    double lr = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    ToyModel model;
    std::vector<HistoryRow> history;
};

inline void write_history_header(std::ostream& out) { out << "iter,phase,lr,loss,accuracy\n"; }

inline void write_history_row(std::ostream& out, const HistoryRow& row)
{
    std::string line = std::to_string(row.iter) + "," + std::to_string(row.phase) + ",";
    detail::append_shortest(line, row.lr);
    line += ',';
    detail::append_shortest(line, row.loss);
    line += ',';
    detail::append_shortest(line, row.accuracy);
    out << line << '\n';
}

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history)
{
    write_history_header(out);
    for (const auto& row : history) write_history_row(out, row);
}

struct StepResult {
    double loss = 0.0;
    double accuracy = 0.0;
    WeightGradients grads;
};

/// Loss and weight gradients for one sample through the full model.
inline StepResult sample_gradients(const ToyModel& model, const LabeledSample& sample, double lambda,
                                   const CgConfig& cg, bool use_pairwise)
{
    auto out = model_forward(model, sample.features, lambda, cg, use_pairwise);
    auto loss = softmax_xent(out.x, sample.truth, model.dims);
    auto layer_grads = backward(out.layer, out.x, loss.dl_dx);
    return {loss.loss, loss.pixel_accuracy, model_backward(model, sample.features, layer_grads)};
}

using PhaseCallback = std::function<void(int phase, const ToyModel&)>;
using RowCallback = std::function<void(const HistoryRow&)>;

namespace detail {

inline void sgd_update(Matrix& w, const Matrix& grad, double step)
{
    auto dst = w.span();
    const auto src = grad.span();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= step * src[i];
}

} // namespace detail

/// Runs both phases on `train`. History rows are numbered across phases.
inline TrainResult train_two_phase(const std::vector<LabeledSample>& train, const Dims& dims, std::size_t feature_dim,
                                   const TrainConfig& cfg, const CgConfig& cg = {},
                                   const PhaseCallback& on_phase_end = {}, const RowCallback& on_row = {})
{
    cfg.validate();
    if (train.empty()) throw ConfigError("train_two_phase: dataset is empty");

    TrainResult result{ToyModel(dims, feature_dim), {}};
    ToyModel& model = result.model;
    if (cfg.iters_per_phase == 0) {
        if (on_phase_end) {
            on_phase_end(1, model);
            on_phase_end(2, model);
        }
        return result;
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    std::size_t global_iter = 0;

    for (int phase = 1; phase <= 2; ++phase) {
        const bool pairwise = phase == 2;
        if (pairwise) {
            std::normal_distribution<double> normal(0.0, cfg.embed_init_scale);
            for (auto& w : model.w_embed)
                for (double& v : w.span()) v = normal(rng);
        }
        const double base_lr = pairwise ? cfg.base_lr_pairwise : cfg.base_lr_unary;
        for (std::size_t t = 0; t < cfg.iters_per_phase; ++t, ++global_iter) {
            const double lr = poly_lr(base_lr, t, cfg.iters_per_phase, cfg.poly_power);
            HistoryRow row{global_iter, phase, lr, 0.0, 0.0};
            Matrix g_unary(dims.labels, feature_dim);
            std::vector<Matrix> g_embed(dims.labels, Matrix(dims.embed_dim, feature_dim));
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                const auto& sample = train[pick(rng)];
                StepResult step;
                try {
                    step = sample_gradients(model, sample, cfg.lambda, cg, pairwise);
                } catch (const NumericError& e) {
                    throw DivergenceError("phase " + std::to_string(phase) + ", iteration " + std::to_string(t) +
                                          ": " + e.what());
                }
                if (!std::isfinite(step.loss))
                    throw DivergenceError("phase " + std::to_string(phase) + ", iteration " + std::to_string(t) +
                                          ": loss is not finite (lr=" + std::to_string(lr) + ")");
                row.loss += step.loss * inv_batch;
                row.accuracy += step.accuracy * inv_batch;
                axpy(inv_batch, step.grads.d_unary.span(), g_unary.span());
                for (std::size_t l = 0; l < dims.labels; ++l)
                    axpy(inv_batch, step.grads.d_embed[l].span(), g_embed[l].span());
            }
            if (!pairwise || cfg.joint_finetune) {
                const double unary_lr =
                    pairwise ? poly_lr(cfg.base_lr_unary, t, cfg.iters_per_phase, cfg.poly_power) : lr;
                detail::sgd_update(model.w_unary, g_unary, unary_lr);
            }
            if (pairwise)
                for (std::size_t l = 0; l < dims.labels; ++l) detail::sgd_update(model.w_embed[l], g_embed[l], lr);
            if (!model.w_unary.all_finite())
                throw DivergenceError("phase " + std::to_string(phase) + ", iteration " + std::to_string(t) +
                                      ": unary weights became non-finite");
            for (const auto& w : model.w_embed)
                if (!w.all_finite())
                    throw DivergenceError("phase " + std::to_string(phase) + ", iteration " + std::to_string(t) +
                                          ": embedding weights became non-finite");
            if (on_row) on_row(row);
            result.history.push_back(row);
        }
        if (on_phase_end) on_phase_end(phase, model);
    }
    return result;
}

struct EvalReport {
    double unary_acc = 0.0; // embeddings forced to zero
    double dense_acc = 0.0; // full dense G-CRF
    double delta() const { return dense_acc - unary_acc; }
};

/// Mean pixel accuracy of the unary-only and the dense model over `samples`.
inline EvalReport evaluate(const ToyModel& model, const std::vector<LabeledSample>& samples, double lambda,
                           const CgConfig& cg = {})
{
    if (samples.empty()) throw ConfigError("evaluate: no samples");
    EvalReport rep;
    for (const auto& s : samples) {
        rep.unary_acc += softmax_xent(model_forward(model, s.features, lambda, cg, false).x, s.truth, model.dims)
                             .pixel_accuracy;
        rep.dense_acc += softmax_xent(model_forward(model, s.features, lambda, cg, true).x, s.truth, model.dims)
                             .pixel_accuracy;
    }
    rep.unary_acc /= static_cast<double>(samples.size());
    rep.dense_acc /= static_cast<double>(samples.size());
    return rep;
}

} // namespace dgcrf
