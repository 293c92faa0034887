#pragma once

// JSON run configuration shared by the command-line tool.
//
//   {
//     "dims":   {"P": 256, "L": 3, "D": 8},
//     "lambda": 1.0,
//     "cg":     {"rel_tol": 1e-10, "abs_tol": 1e-14, "max_iters": 0},
//     "train":  {"base_lr_unary": 0.01, "base_lr_pairwise": 0.0025, "poly_power": 0.9,
//                "iters_per_phase": 2000, "batch_size": 4, "seed": 0,
//                "embed_init_scale": 0.1, "joint_finetune": false},
//     "task":   {"width": 16, "height": 16, "labels": 3, "noise_sigma": 1.0,
//                "smooth_radius": 3, "n_train": 64, "n_test": 32, "seed": 0},
//     "grad_check": {"instances": 25, "seed": 0, "fd_step": 1e-5},
//     "paths":  {"model_dir": "model", "metrics_csv": "metrics.csv"}
//   }
//
// Unknown keys are errors. Missing keys keep their defaults. For train/eval,
// dims.P and dims.L default to the task grid and label count and must agree
// with them when given.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "dgcrf/cg.hpp"
#include "dgcrf/errors.hpp"
#include "dgcrf/grad_check.hpp"
#include "dgcrf/synth.hpp"
#include "dgcrf/tensor.hpp"
#include "dgcrf/train.hpp"

namespace dgcrf {

struct PathsConfig {
    std::string model_dir = "model";
    std::string metrics_csv = "metrics.csv";
};

struct GradCheckConfig {
    std::size_t instances = 25;
    std::uint64_t seed = 0;
    double fd_step = 1e-5;
};

enum class RunKind { train, grad_check };

struct RunConfig {
    Dims dims{256, 3, 8};
    double lambda = 1.0;
    CgConfig cg{};
    TrainConfig train{};
    SyntheticTaskSpec task{};
    GradCheckConfig grad_check{};
    PathsConfig paths{};

    static RunConfig defaults(RunKind kind)
    {
        RunConfig c;
        if (kind == RunKind::grad_check) c.dims = Dims(8, 3, 4);
        return c;
    }

    GradCheckSpec grad_check_spec(bool sabotage = false) const
    {
        GradCheckSpec s;
        s.dims = dims;
        s.lambda = lambda;
        s.cg = cg;
        s.instances = grad_check.instances;
        s.seed = grad_check.seed;
        s.fd_step = grad_check.fd_step;
        s.sabotage = sabotage;
        return s;
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& dst, const std::string& where)
{
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + (where.empty() ? std::string(key) : where + "." + key) +
                          "' has the wrong type");
    }
}

} // namespace detail

inline nlohmann::json to_json(const RunConfig& c)
{
    const auto& t = c.train;
    return {{"dims", {{"P", c.dims.pixels}, {"L", c.dims.labels}, {"D", c.dims.embed_dim}}},
            {"lambda", c.lambda},
            {"cg", {{"rel_tol", c.cg.rel_tol}, {"abs_tol", c.cg.abs_tol}, {"max_iters", c.cg.max_iters}}},
            {"train",
             {{"base_lr_unary", t.base_lr_unary},
              {"base_lr_pairwise", t.base_lr_pairwise},
              {"poly_power", t.poly_power},
              {"iters_per_phase", t.iters_per_phase},
              {"batch_size", t.batch_size},
              {"seed", t.seed},
              {"embed_init_scale", t.embed_init_scale},
              {"joint_finetune", t.joint_finetune}}},
            {"task", to_json(c.task)},
            {"grad_check",
             {{"instances", c.grad_check.instances}, {"seed", c.grad_check.seed}, {"fd_step", c.grad_check.fd_step}}},
            {"paths", {{"model_dir", c.paths.model_dir}, {"metrics_csv", c.paths.metrics_csv}}}};
}

inline RunConfig parse_run_config(const nlohmann::json& doc, RunKind kind)
{
    using detail::take;
    RunConfig c = RunConfig::defaults(kind);
    detail::reject_unknown(doc, "", {"dims", "lambda", "cg", "train", "task", "grad_check", "paths"});

    bool have_p = false, have_l = false, have_task_labels = false;
    std::size_t p = c.dims.pixels, l = c.dims.labels, d = c.dims.embed_dim;
    if (doc.contains("dims")) {
        const auto& j = doc.at("dims");
        detail::reject_unknown(j, "dims", {"P", "L", "D"});
        have_p = j.contains("P");
        have_l = j.contains("L");
        take(j, "P", p, "dims");
        take(j, "L", l, "dims");
        take(j, "D", d, "dims");
    }
    take(doc, "lambda", c.lambda, "");
    if (doc.contains("cg")) {
        const auto& j = doc.at("cg");
        detail::reject_unknown(j, "cg", {"rel_tol", "abs_tol", "max_iters"});
        take(j, "rel_tol", c.cg.rel_tol, "cg");
        take(j, "abs_tol", c.cg.abs_tol, "cg");
        take(j, "max_iters", c.cg.max_iters, "cg");
    }
    if (doc.contains("train")) {
        const auto& j = doc.at("train");
        detail::reject_unknown(j, "train",
                               {"base_lr_unary", "base_lr_pairwise", "poly_power", "iters_per_phase", "batch_size",
                                "seed", "embed_init_scale", "joint_finetune"});
        take(j, "base_lr_unary", c.train.base_lr_unary, "train");
        take(j, "base_lr_pairwise", c.train.base_lr_pairwise, "train");
        take(j, "poly_power", c.train.poly_power, "train");
        take(j, "iters_per_phase", c.train.iters_per_phase, "train");
        take(j, "batch_size", c.train.batch_size, "train");
        take(j, "seed", c.train.seed, "train");
        take(j, "embed_init_scale", c.train.embed_init_scale, "train");
        take(j, "joint_finetune", c.train.joint_finetune, "train");
    }
    if (doc.contains("task")) {
        const auto& j = doc.at("task");
        detail::reject_unknown(
            j, "task", {"width", "height", "labels", "noise_sigma", "smooth_radius", "n_train", "n_test", "seed"});
        have_task_labels = j.contains("labels");
        take(j, "width", c.task.width, "task");
        take(j, "height", c.task.height, "task");
        take(j, "labels", c.task.labels, "task");
        take(j, "noise_sigma", c.task.noise_sigma, "task");
        take(j, "smooth_radius", c.task.smooth_radius, "task");
        take(j, "n_train", c.task.n_train, "task");
        take(j, "n_test", c.task.n_test, "task");
        take(j, "seed", c.task.seed, "task");
    }
    if (doc.contains("grad_check")) {
        const auto& j = doc.at("grad_check");
        detail::reject_unknown(j, "grad_check", {"instances", "seed", "fd_step"});
        take(j, "instances", c.grad_check.instances, "grad_check");
        take(j, "seed", c.grad_check.seed, "grad_check");
        take(j, "fd_step", c.grad_check.fd_step, "grad_check");
    }
    if (doc.contains("paths")) {
        const auto& j = doc.at("paths");
        detail::reject_unknown(j, "paths", {"model_dir", "metrics_csv"});
        take(j, "model_dir", c.paths.model_dir, "paths");
        take(j, "metrics_csv", c.paths.metrics_csv, "paths");
    }

    if (kind == RunKind::train) {
        if (have_l && !have_task_labels) c.task.labels = l;
        if (!have_l) l = c.task.labels;
        if (l != c.task.labels)
            throw ConfigError("dims.L (" + std::to_string(l) + ") disagrees with task.labels (" +
                              std::to_string(c.task.labels) + ")");
        if (!have_p) p = c.task.pixels();
        if (p != c.task.pixels())
            throw ConfigError("dims.P (" + std::to_string(p) + ") disagrees with task width*height (" +
                              std::to_string(c.task.pixels()) + ")");
        c.task.validate();
    }
    try {
        c.dims = Dims(p, l, d);
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }
    c.train.lambda = c.lambda;
    if (!(c.lambda > 0.0)) throw ConfigError("lambda must be positive");
    c.cg.validate();
    c.train.validate();
    if (!(c.grad_check.fd_step > 0.0)) throw ConfigError("grad_check.fd_step must be positive");
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunKind kind)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(doc, kind);
}

} // namespace dgcrf
