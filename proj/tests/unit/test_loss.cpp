#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgcrf/grad_check.hpp"
#include "dgcrf/loss.hpp"

using namespace dgcrf;

TEST(SoftmaxXent, UniformBlock)
{
    const Dims dims(1, 2, 1);
    const auto rep = softmax_xent(Vector{0, 0}, {0}, dims);
    EXPECT_NEAR(rep.loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(rep.dl_dx[0], -0.5, 1e-15);
    EXPECT_NEAR(rep.dl_dx[1], 0.5, 1e-15);
    EXPECT_EQ(rep.pixel_accuracy, 1.0); // tie goes to label 0
}

TEST(SoftmaxXent, GradientScalesWithPixelCount)
{
    const Dims dims(4, 2, 1);
    const auto rep = softmax_xent(Vector(8), {0, 1, 0, 1}, dims);
    EXPECT_NEAR(rep.loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(rep.dl_dx[0], -0.125, 1e-15);
    EXPECT_NEAR(rep.dl_dx[3], -0.125, 1e-15);
    EXPECT_EQ(rep.pixel_accuracy, 0.5);
}

TEST(SoftmaxXent, SaturatedBlockStaysFinite)
{
    const auto rep = softmax_xent(Vector{1000, -1000}, {0}, Dims(1, 2, 1));
    EXPECT_TRUE(std::isfinite(rep.loss));
    EXPECT_NEAR(rep.loss, 0.0, 1e-300);
    EXPECT_NEAR(rep.dl_dx[0], 0.0, 1e-300);
    EXPECT_NEAR(rep.dl_dx[1], 0.0, 1e-300);
    const auto wrong = softmax_xent(Vector{1000, -1000}, {1}, Dims(1, 2, 1));
    EXPECT_NEAR(wrong.loss, 2000.0, 1e-9);
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(31);
    const Dims dims(6, 4, 1);
    const Labels truth{0, 3, 2, 1, 1, 0};
    for (int inst = 0; inst < 20; ++inst) {
        Vector x = random_vector(24, rng, 3.0);
        const auto rep = softmax_xent(x, truth, dims);
        EXPECT_GE(rep.loss, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + 1e-6;
            const double up = softmax_xent(x, truth, dims).loss;
            x[i] = saved - 1e-6;
            const double down = softmax_xent(x, truth, dims).loss;
            x[i] = saved;
            EXPECT_NEAR(rep.dl_dx[i], (up - down) / 2e-6, 1e-6);
        }
    }
}

TEST(SoftmaxXent, Errors)
{
    EXPECT_THROW(softmax_xent(Vector{0, 0}, {2}, Dims(1, 2, 1)), IndexError);
    EXPECT_THROW(softmax_xent(Vector{0, 0}, {0, 0}, Dims(1, 2, 1)), ShapeError);
    EXPECT_THROW(softmax_xent(Vector{0, 0, 0}, {0}, Dims(1, 2, 1)), ShapeError);
}

TEST(PredictLabels, ArgmaxPerPixel)
{
    EXPECT_EQ(predict_labels(Vector{0, 2, 1, 5, 5, 4}, Dims(2, 3, 1)), (Labels{1, 0}));
}
