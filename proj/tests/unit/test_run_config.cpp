#include <gtest/gtest.h>

#include "dgcrf/run_config.hpp"

using namespace dgcrf;
using nlohmann::json;

TEST(RunConfig, DefaultsForTraining)
{
    const auto c = parse_run_config(json::object(), RunKind::train);
    EXPECT_EQ(c.dims.pixels, 256u);
    EXPECT_EQ(c.dims.labels, 3u);
    EXPECT_EQ(c.dims.embed_dim, 8u);
    EXPECT_EQ(c.lambda, 1.0);
    EXPECT_EQ(c.train.iters_per_phase, 2000u);
    EXPECT_EQ(c.paths.metrics_csv, "metrics.csv");
}

TEST(RunConfig, DefaultsForGradCheck)
{
    const auto c = parse_run_config(json::object(), RunKind::grad_check);
    EXPECT_EQ(c.dims.variables(), 24u);
    EXPECT_EQ(c.dims.embed_dim, 4u);
    EXPECT_EQ(c.grad_check.instances, 25u);
}

TEST(RunConfig, OverridesAndLambdaPropagation)
{
    const auto c = parse_run_config(
        json::parse(R"({"lambda": 0.5, "cg": {"rel_tol": 1e-12}, "task": {"width": 4, "height": 5, "labels": 2},
                        "train": {"seed": 9}})"),
        RunKind::train);
    EXPECT_EQ(c.dims.pixels, 20u);
    EXPECT_EQ(c.dims.labels, 2u);
    EXPECT_EQ(c.train.lambda, 0.5);
    EXPECT_EQ(c.train.seed, 9u);
    EXPECT_EQ(c.cg.rel_tol, 1e-12);
}

TEST(RunConfig, EchoRoundTrips)
{
    const auto c = parse_run_config(json::parse(R"({"dims": {"D": 3}, "train": {"batch_size": 2}})"), RunKind::train);
    const auto again = parse_run_config(to_json(c), RunKind::train);
    EXPECT_EQ(to_json(again), to_json(c));
}

TEST(RunConfig, UnknownKeysRejected)
{
    EXPECT_THROW(parse_run_config(json::parse(R"({"lamda": 1})"), RunKind::train), ConfigError);
    try {
        parse_run_config(json::parse(R"({"cg": {"rel_tool": 1e-9}})"), RunKind::train);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cg.rel_tool"), std::string::npos);
    }
}

TEST(RunConfig, InvalidValuesRejected)
{
    EXPECT_THROW(parse_run_config(json::parse(R"({"lambda": "big"})"), RunKind::train), ConfigError);
    EXPECT_THROW(parse_run_config(json::parse(R"({"lambda": 0})"), RunKind::train), ConfigError);
    EXPECT_THROW(parse_run_config(json::parse(R"({"dims": {"P": 100}})"), RunKind::train), ConfigError);
    EXPECT_THROW(parse_run_config(json::parse(R"({"dims": {"L": 4}, "task": {"labels": 3}})"), RunKind::train),
                 ConfigError);
    EXPECT_THROW(parse_run_config(json::parse(R"({"dims": {"D": 0}})"), RunKind::grad_check), ConfigError);
    EXPECT_THROW(parse_run_config(json::parse(R"({"train": {"poly_power": 2}})"), RunKind::train), ConfigError);
    EXPECT_THROW(parse_run_config(json::parse("[]"), RunKind::train), ConfigError);
}

TEST(RunConfig, GradCheckSpecCarriesSettings)
{
    const auto c = parse_run_config(json::parse(R"({"dims": {"P": 1, "L": 1, "D": 1}, "grad_check": {"instances": 3}})"),
                                    RunKind::grad_check);
    const auto spec = c.grad_check_spec(true);
    EXPECT_EQ(spec.dims.variables(), 1u);
    EXPECT_EQ(spec.instances, 3u);
    EXPECT_TRUE(spec.sabotage);
}

TEST(RunConfig, MissingFile)
{
    EXPECT_THROW(load_run_config("/nonexistent/cfg.json", RunKind::train), ConfigError);
}
