#pragma once

// Linear stand-in for the unary and pairwise network streams:
//   B[(p,l)]        = row_l(W_unary) . f_p
//   E[:, (p,l)]     = W_embed[l] f_p
// followed by the G-CRF layer x = (E'E + lambda I)^-1 B.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgcrf/cg.hpp"
#include "dgcrf/errors.hpp"
#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/matrix_io.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

struct ToyModel {
    Dims dims;
    std::size_t feature_dim = 1;
    Matrix w_unary;              // L x F
    std::vector<Matrix> w_embed; // L matrices, each D x F

    ToyModel() = default;

    /// All-zero weights.
    ToyModel(Dims d, std::size_t features)
        : dims(d), feature_dim(features), w_unary(d.labels, features), w_embed(d.labels, Matrix(d.embed_dim, features))
    {
        if (features == 0) throw ShapeError("ToyModel: feature_dim must be positive");
    }

    void validate() const
    {
        if (w_unary.rows() != dims.labels || w_unary.cols() != feature_dim)
            throw ShapeError("ToyModel: W_unary must be L x F");
        if (w_embed.size() != dims.labels) throw ShapeError("ToyModel: need one embedding map per label");
        for (const auto& w : w_embed)
            if (w.rows() != dims.embed_dim || w.cols() != feature_dim)
                throw ShapeError("ToyModel: each W_embed[l] must be D x F");
    }
};

struct WeightGradients {
    Matrix d_unary;              // L x F
    std::vector<Matrix> d_embed; // L x (D x F)
};

struct ModelOutput {
    Vector unary;    // B
    GcrfLayer layer; // holds E (D x N) and lambda
    Vector x;
    CgReport report;
};

namespace detail {

inline void check_features(const ToyModel& model, const Matrix& features)
{
    model.validate();
    if (features.rows() != model.feature_dim || features.cols() != model.dims.pixels)
        throw ShapeError("features must be F x P = " + std::to_string(model.feature_dim) + " x " +
                         std::to_string(model.dims.pixels) + ", got " + std::to_string(features.rows()) + " x " +
                         std::to_string(features.cols()));
}

} // namespace detail

/// Unary field B from per-pixel features (F x P).
inline Vector unary_scores(const ToyModel& model, const Matrix& features)
{
    detail::check_features(model, features);
    const std::size_t P = model.dims.pixels, L = model.dims.labels, F = model.feature_dim;
    Vector b(P * L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto w = model.w_unary.row(l);
        for (std::size_t f = 0; f < F; ++f) {
            const double wf = w[f];
            if (wf == 0.0) continue;
            const auto feat = features.row(f);
            for (std::size_t p = 0; p < P; ++p) b[p * L + l] += wf * feat[p];
        }
    }
    return b;
}

/// Embedding matrix E (D x N) from per-pixel features.
inline Matrix embedding_matrix(const ToyModel& model, const Matrix& features)
{
    detail::check_features(model, features);
    const std::size_t P = model.dims.pixels, L = model.dims.labels, D = model.dims.embed_dim, F = model.feature_dim;
    Matrix emb(D, P * L);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t d = 0; d < D; ++d) {
            auto out = emb.row(d);
            for (std::size_t f = 0; f < F; ++f) {
                const double wf = model.w_embed[l](d, f);
                if (wf == 0.0) continue;
                const auto feat = features.row(f);
                for (std::size_t p = 0; p < P; ++p) out[p * L + l] += wf * feat[p];
            }
        }
    return emb;
}

/// B, E and the G-CRF solution x. With use_pairwise = false, E is forced to zero.
inline ModelOutput model_forward(const ToyModel& model, const Matrix& features, double lambda, const CgConfig& cg,
                                 bool use_pairwise = true)
{
    Vector b = unary_scores(model, features);
    Matrix emb = use_pairwise ? embedding_matrix(model, features) : Matrix(model.dims.embed_dim, model.dims.variables());
    GcrfLayer layer(model.dims, std::move(emb), lambda, cg);
    auto [x, report] = forward(layer, b);
    return {std::move(b), std::move(layer), std::move(x), std::move(report)};
}

/// Chain rule from layer gradients to weight gradients:
///   dW_unary[l]  = sum_p dB[(p,l)] f_p'
///   dW_embed[l]  = sum_p dE[:, (p,l)] f_p'
inline WeightGradients model_backward(const ToyModel& model, const Matrix& features, const LayerGradients& grads)
{
    detail::check_features(model, features);
    const std::size_t P = model.dims.pixels, L = model.dims.labels, D = model.dims.embed_dim, F = model.feature_dim;
    if (grads.d_unary.size() != P * L) throw ShapeError("model_backward: d_unary has the wrong length");
    if (grads.d_embeddings.rows() != D || grads.d_embeddings.cols() != P * L)
        throw ShapeError("model_backward: d_embeddings must be D x N");

    WeightGradients out{Matrix(L, F), std::vector<Matrix>(L, Matrix(D, F))};
    for (std::size_t f = 0; f < F; ++f) {
        const auto feat = features.row(f);
        for (std::size_t l = 0; l < L; ++l) {
            double s = 0.0;
            for (std::size_t p = 0; p < P; ++p) s += grads.d_unary[p * L + l] * feat[p];
            out.d_unary(l, f) = s;
        }
        for (std::size_t d = 0; d < D; ++d) {
            const auto ge = grads.d_embeddings.row(d);
            for (std::size_t l = 0; l < L; ++l) {
                double s = 0.0;
                for (std::size_t p = 0; p < P; ++p) s += ge[p * L + l] * feat[p];
                out.d_embed[l](d, f) = s;
            }
        }
    }
    return out;
}

// ---- checkpoints ----

/// w_unary.txt, w_embed_<l>.txt and a model.json manifest.
inline void save_model(const std::filesystem::path& dir, const ToyModel& model)
{
    model.validate();
    std::filesystem::create_directories(dir);
    nlohmann::json manifest{{"P", model.dims.pixels},
                            {"L", model.dims.labels},
                            {"D", model.dims.embed_dim},
                            {"F", model.feature_dim},
                            {"w_unary", "w_unary.txt"},
                            {"w_embed", nlohmann::json::array()}};
    write_matrix(dir / "w_unary.txt", model.w_unary);
    for (std::size_t l = 0; l < model.w_embed.size(); ++l) {
        const std::string name = "w_embed_" + std::to_string(l) + ".txt";
        write_matrix(dir / name, model.w_embed[l]);
        manifest["w_embed"].push_back(name);
    }
    std::ofstream out(dir / "model.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw FormatError("cannot write model manifest in '" + dir.string() + "'");
}

inline ToyModel load_model(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "model.json");
    if (!in) throw FormatError("missing model.json in '" + dir.string() + "'");
    try {
        const auto manifest = nlohmann::json::parse(in);
        ToyModel model(Dims(manifest.at("P").get<std::size_t>(), manifest.at("L").get<std::size_t>(),
                            manifest.at("D").get<std::size_t>()),
                       manifest.at("F").get<std::size_t>());
        model.w_unary = read_matrix(dir / manifest.at("w_unary").get<std::string>());
        const auto& embed = manifest.at("w_embed");
        model.w_embed.clear();
        for (const auto& name : embed) model.w_embed.push_back(read_matrix(dir / name.get<std::string>()));
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model.json: " + std::string(e.what()));
    }
}

} // namespace dgcrf
