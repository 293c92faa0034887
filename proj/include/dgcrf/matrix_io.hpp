#pragma once

// Whitespace matrix text format:
//   line 1: "rows cols"
//   then rows*cols decimal values, row-major, any whitespace layout.
// Values are written in shortest round-trip form, so read(write(m)) == m bit for bit.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dgcrf/errors.hpp"
#include "dgcrf/tensor.hpp"

namespace dgcrf {

namespace detail {

struct Token {
    std::string_view text;
    std::size_t line;
};

inline std::vector<Token> tokenize(std::string_view content)
{
    std::vector<Token> out;
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < content.size()) {
        char c = content[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
        } else {
            std::size_t j = i;
            while (j < content.size() && content[j] != ' ' && content[j] != '\t' && content[j] != '\r' &&
                   content[j] != '\n')
                ++j;
            out.push_back({content.substr(i, j - i), line});
            i = j;
        }
    }
    return out;
}

inline std::size_t parse_count(const Token& t, const std::string& source)
{
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
        throw FormatError(source + ":" + std::to_string(t.line) + ": malformed header token '" +
                          std::string(t.text) + "'");
    return v;
}

inline double parse_value(const Token& t, const std::string& source)
{
    double v = 0.0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw FormatError(source + ":" + std::to_string(t.line) + ": unparsable value '" +
                          std::string(t.text) + "'");
    if (!std::isfinite(v))
        throw FormatError(source + ":" + std::to_string(t.line) + ": non-finite value '" +
                          std::string(t.text) + "'");
    return v;
}

inline void append_shortest(std::string& out, double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

} // namespace detail

/// Parses the matrix text format from an in-memory string. `source` labels error messages.
inline Matrix parse_matrix(std::string_view content, const std::string& source = "<string>")
{
    auto tokens = detail::tokenize(content);
    if (tokens.size() < 2)
        throw FormatError(source + ":1: missing 'rows cols' header");
    if (tokens[0].line != tokens[1].line)
        throw FormatError(source + ":" + std::to_string(tokens[0].line) + ": header must be 'rows cols' on one line");
    std::size_t rows = detail::parse_count(tokens[0], source);
    std::size_t cols = detail::parse_count(tokens[1], source);
    std::size_t expected = rows * cols;
    std::size_t have = tokens.size() - 2;
    if (have < expected) {
        std::size_t last_line = tokens.back().line;
        throw FormatError(source + ":" + std::to_string(last_line) + ": expected " + std::to_string(expected) +
                          " values, found " + std::to_string(have) + " (value " + std::to_string(have + 1) +
                          " missing)");
    }
    if (have > expected)
        throw FormatError(source + ":" + std::to_string(tokens[2 + expected].line) + ": expected " +
                          std::to_string(expected) + " values, found " + std::to_string(have));
    std::vector<double> data;
    data.reserve(expected);
    for (std::size_t k = 0; k < expected; ++k) data.push_back(detail::parse_value(tokens[2 + k], source));
    return Matrix(rows, cols, std::move(data));
}

inline std::string format_matrix(const Matrix& m)
{
    std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out += ' ';
            detail::append_shortest(out, m(r, c));
        }
        out += '\n';
    }
    return out;
}

inline Matrix read_matrix(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open matrix file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_matrix(ss.str(), path.string());
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << format_matrix(m);
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

/// Vectors are stored as 1 x len matrices; either orientation is accepted on read.
inline Vector matrix_to_vector(const Matrix& m, const std::string& source = "<matrix>")
{
    if (m.rows() != 1 && m.cols() != 1)
        throw ShapeError(source + ": expected a 1xN or Nx1 matrix for a vector, got " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()));
    return Vector(m.values());
}

inline Matrix vector_to_matrix(const Vector& v) { return Matrix(1, v.size(), v.values()); }

inline Vector read_vector(const std::filesystem::path& path)
{
    return matrix_to_vector(read_matrix(path), path.string());
}

inline void write_vector(const std::filesystem::path& path, const Vector& v)
{
    write_matrix(path, vector_to_matrix(v));
}

} // namespace dgcrf
