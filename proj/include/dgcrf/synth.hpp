#pragma once

// Synthetic dense-labeling tasks and a small PGM reader.
//
// Ground truth: L independent Gaussian noise fields, each box-smoothed with the
// given radius, per-pixel argmax. Features per pixel (F = 2L + 2):
//   [0, L)      onehot(truth) + N(0, sigma^2) noise
//   [L, 2L)     3x3 average of the first block (clipped at the border)
//   2L, 2L+1    x and y coordinates scaled to [-1, 1]

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgcrf/errors.hpp"
#include "dgcrf/loss.hpp"
#include "dgcrf/matrix_io.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

struct SyntheticTaskSpec {
    std::size_t width = 16;
    std::size_t height = 16;
    std::size_t labels = 3;
    double noise_sigma = 1.0;
    std::size_t smooth_radius = 3;
    std::size_t n_train = 64;
    std::size_t n_test = 32;
    std::uint64_t seed = 0;

    std::size_t pixels() const { return width * height; }
    std::size_t feature_dim() const { return 2 * labels + 2; }

    void validate() const
    {
        if (width == 0 || height == 0) throw ConfigError("task: width and height must be positive");
        if (labels == 0) throw ConfigError("task: labels must be positive");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("task: noise_sigma must be >= 0");
    }
};

struct LabeledSample {
    Matrix features; // F x P
    Labels truth;    // P
};

struct SyntheticDataset {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
};

namespace detail {

// Mean over the (2r+1)^2 window clipped to the grid; uses a summed-area table.
inline std::vector<double> box_mean(const std::vector<double>& img, std::size_t w, std::size_t h, std::size_t r)
{
    if (r == 0) return img;
    std::vector<double> sat((w + 1) * (h + 1), 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            sat[(y + 1) * (w + 1) + x + 1] =
                img[y * w + x] + sat[y * (w + 1) + x + 1] + sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
    std::vector<double> out(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t x0 = x > r ? x - r : 0, y0 = y > r ? y - r : 0;
            const std::size_t x1 = std::min(w, x + r + 1), y1 = std::min(h, y + r + 1);
            const double s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] +
                             sat[y0 * (w + 1) + x0];
            out[y * w + x] = s / static_cast<double>((x1 - x0) * (y1 - y0));
        }
    return out;
}

inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

} // namespace detail

/// One sample; deterministic in (spec.seed, index).
inline LabeledSample generate_sample(const SyntheticTaskSpec& spec, std::uint64_t index)
{
    const std::size_t w = spec.width, h = spec.height, L = spec.labels, P = w * h;
    auto rng = detail::sample_rng(spec.seed, index);
    std::normal_distribution<double> normal(0.0, 1.0);

    Labels truth(P, 0);
    std::vector<double> best(P, -std::numeric_limits<double>::infinity());
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> field(P);
        for (double& v : field) v = normal(rng);
        field = detail::box_mean(field, w, h, spec.smooth_radius);
        for (std::size_t p = 0; p < P; ++p)
            if (field[p] > best[p]) {
                best[p] = field[p];
                truth[p] = l;
            }
    }

    Matrix feats(spec.feature_dim(), P);
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> channel(P);
        for (std::size_t p = 0; p < P; ++p)
            channel[p] = (truth[p] == l ? 1.0 : 0.0) + spec.noise_sigma * normal(rng);
        const auto local = detail::box_mean(channel, w, h, 1);
        for (std::size_t p = 0; p < P; ++p) {
            feats(l, p) = channel[p];
            feats(L + l, p) = local[p];
        }
    }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t p = y * w + x;
            feats(2 * L, p) = w > 1 ? 2.0 * static_cast<double>(x) / static_cast<double>(w - 1) - 1.0 : 0.0;
            feats(2 * L + 1, p) = h > 1 ? 2.0 * static_cast<double>(y) / static_cast<double>(h - 1) - 1.0 : 0.0;
        }
    return {std::move(feats), std::move(truth)};
}

/// Training samples use indices [0, n_train), test samples [n_train, n_train + n_test).
inline SyntheticDataset generate(const SyntheticTaskSpec& spec)
{
    spec.validate();
    SyntheticDataset out;
    out.train.reserve(spec.n_train);
    out.test.reserve(spec.n_test);
    for (std::size_t i = 0; i < spec.n_train; ++i) out.train.push_back(generate_sample(spec, i));
    for (std::size_t i = 0; i < spec.n_test; ++i) out.test.push_back(generate_sample(spec, spec.n_train + i));
    return out;
}

// ---- PGM ----

/// Reads a P2 (ASCII) or P5 (binary) PGM; intensities scaled to [0, 1], shape height x width.
inline Matrix load_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open PGM '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    const std::string src = path.string();

    std::size_t pos = 0;
    auto skip_space_and_comments = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* what) -> std::size_t {
        skip_space_and_comments();
        std::size_t start = pos, v = 0;
        while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos])))
            v = v * 10 + static_cast<std::size_t>(data[pos++] - '0');
        if (pos == start) throw FormatError(src + ": expected " + std::string(what));
        return v;
    };

    if (data.size() < 2 || data[0] != 'P' || (data[1] != '2' && data[1] != '5'))
        throw FormatError(src + ": bad magic (expected P2 or P5)");
    const bool binary = data[1] == '5';
    pos = 2;
    const std::size_t width = read_uint("width"), height = read_uint("height"), maxval = read_uint("maxval");
    if (width == 0 || height == 0) throw FormatError(src + ": zero image dimension");
    if (maxval == 0 || maxval > 65535) throw FormatError(src + ": maxval must be in [1, 65535]");

    const std::size_t count = width * height;
    std::vector<double> px(count);
    if (binary) {
        if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
            throw FormatError(src + ": missing whitespace before binary payload");
        ++pos;
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        if (data.size() - pos < count * bytes)
            throw FormatError(src + ": truncated payload (" + std::to_string(data.size() - pos) + " of " +
                              std::to_string(count * bytes) + " bytes)");
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t v = static_cast<unsigned char>(data[pos + i * bytes]);
            if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(data[pos + i * bytes + 1]);
            px[i] = static_cast<double>(v);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            skip_space_and_comments();
            if (pos >= data.size())
                throw FormatError(src + ": truncated payload (" + std::to_string(i) + " of " + std::to_string(count) +
                                  " samples)");
            px[i] = static_cast<double>(read_uint("sample"));
        }
    }
    for (double& v : px) {
        if (v > static_cast<double>(maxval)) throw FormatError(src + ": sample exceeds maxval");
        v /= static_cast<double>(maxval);
    }
    return Matrix(height, width, std::move(px));
}

/// Feature grid for a grayscale image: [intensity, 3x3 mean intensity, x, y], F = 4, P = width*height.
inline Matrix image_features(const Matrix& gray)
{
    const std::size_t h = gray.rows(), w = gray.cols(), P = w * h;
    const auto local = detail::box_mean(gray.values(), w, h, 1);
    Matrix feats(4, P);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t p = y * w + x;
            feats(0, p) = gray(y, x);
            feats(1, p) = local[p];
            feats(2, p) = w > 1 ? 2.0 * static_cast<double>(x) / static_cast<double>(w - 1) - 1.0 : 0.0;
            feats(3, p) = h > 1 ? 2.0 * static_cast<double>(y) / static_cast<double>(h - 1) - 1.0 : 0.0;
        }
    return feats;
}

// ---- dataset serialization ----

inline nlohmann::json to_json(const SyntheticTaskSpec& s)
{
    return {{"width", s.width},         {"height", s.height},     {"labels", s.labels},
            {"noise_sigma", s.noise_sigma}, {"smooth_radius", s.smooth_radius}, {"n_train", s.n_train},
            {"n_test", s.n_test},       {"seed", s.seed}};
}

/// Writes one features/truth matrix pair per sample plus manifest.json.
inline void save_dataset(const std::filesystem::path& dir, const SyntheticTaskSpec& spec, const SyntheticDataset& ds)
{
    std::filesystem::create_directories(dir);
    nlohmann::json manifest{{"task", to_json(spec)}, {"train", nlohmann::json::array()}, {"test", nlohmann::json::array()}};
    auto dump = [&](const std::vector<LabeledSample>& samples, const char* split) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::string stem = std::string(split) + "_" + std::to_string(i);
            write_matrix(dir / (stem + "_features.txt"), samples[i].features);
            std::vector<double> t(samples[i].truth.begin(), samples[i].truth.end());
            const std::size_t len = t.size();
            write_matrix(dir / (stem + "_truth.txt"), Matrix(1, len, std::move(t)));
            manifest[split].push_back({{"features", stem + "_features.txt"}, {"truth", stem + "_truth.txt"}});
        }
    };
    dump(ds.train, "train");
    dump(ds.test, "test");
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

inline SyntheticDataset load_dataset(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "manifest.json");
    if (!in) throw FormatError("missing dataset manifest in '" + dir.string() + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("dataset manifest: " + std::string(e.what()));
    }
    SyntheticDataset ds;
    auto load = [&](const char* split, std::vector<LabeledSample>& out) {
        for (const auto& entry : manifest.at(split)) {
            Matrix feats = read_matrix(dir / entry.at("features").get<std::string>());
            Matrix t = read_matrix(dir / entry.at("truth").get<std::string>());
            Labels truth;
            for (double v : t.values()) {
                if (v < 0 || v != std::floor(v)) throw FormatError("truth file holds a non-integer label");
                truth.push_back(static_cast<std::size_t>(v));
            }
            if (truth.size() != feats.cols()) throw ShapeError("dataset: truth length does not match feature columns");
            out.push_back({std::move(feats), std::move(truth)});
        }
    };
    load("train", ds.train);
    load("test", ds.test);
    return ds;
}

} // namespace dgcrf
