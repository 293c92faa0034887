#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/matrix_io.hpp"

namespace dgcrf {

inline nlohmann::json layer_metadata(const GcrfLayer& layer)
{
    const auto& cg = layer.cg_config();
    return {{"P", layer.dims().pixels},
            {"L", layer.dims().labels},
            {"D", layer.dims().embed_dim},
            {"lambda", layer.lambda()},
            {"cg", {{"rel_tol", cg.rel_tol}, {"abs_tol", cg.abs_tol}, {"max_iters", cg.max_iters}}}};
}

/// Writes the D x N embedding matrix and a JSON metadata file next to each other.
inline void save_layer(const std::filesystem::path& embeddings_path, const std::filesystem::path& metadata_path,
                       const GcrfLayer& layer)
{
    write_matrix(embeddings_path, layer.embeddings());
    std::ofstream out(metadata_path);
    out << layer_metadata(layer).dump(2) << "\n";
    if (!out) throw FormatError("cannot write layer metadata '" + metadata_path.string() + "'");
}

inline GcrfLayer load_layer(const std::filesystem::path& embeddings_path, const std::filesystem::path& metadata_path)
{
    std::ifstream in(metadata_path);
    if (!in) throw FormatError("cannot open layer metadata '" + metadata_path.string() + "'");
    try {
        const auto meta = nlohmann::json::parse(in);
        Dims dims(meta.at("P").get<std::size_t>(), meta.at("L").get<std::size_t>(), meta.at("D").get<std::size_t>());
        CgConfig cg;
        if (meta.contains("cg")) {
            const auto& c = meta.at("cg");
            cg.rel_tol = c.value("rel_tol", cg.rel_tol);
            cg.abs_tol = c.value("abs_tol", cg.abs_tol);
            cg.max_iters = c.value("max_iters", cg.max_iters);
        }
        return GcrfLayer(dims, read_matrix(embeddings_path), meta.at("lambda").get<double>(), cg);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(metadata_path.string() + ": " + e.what());
    }
}

} // namespace dgcrf
