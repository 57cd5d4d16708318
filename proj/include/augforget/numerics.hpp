#pragma once

#include "augforget/error.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace augforget {

/// Read-only row-major window onto matrix storage owned elsewhere.
struct MatrixView {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<const double> data;

    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    [[nodiscard]] MatrixView view() const noexcept { return {rows_, cols_, data_}; }
    [[nodiscard]] std::string shape() const;

    [[nodiscard]] Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(std::size_t rows, std::size_t cols);

Matrix transpose(MatrixView v);

/// a·b with 64-bit accumulation. Throws shape_mismatch naming both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul(MatrixView a, MatrixView b);

/// out += a·b. Zero entries of `a` are skipped, which is exact for finite `b`.
void gemm_accumulate(MatrixView a, MatrixView b, std::span<double> out);
/// out += aᵀ·b.
void gemm_tn_accumulate(MatrixView a, MatrixView b, std::span<double> out);

/// xoshiro256** (Blackman & Vigna, 2018) seeded through splitmix64.
///
/// The raw 64-bit stream depends only on the seed. Derived quantities use
/// fixed formulas (53-bit mantissa uniforms, Lemire bounded integers,
/// Box-Muller normals) so that streams match across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Child generator whose stream depends on (seed, tag) only.
    [[nodiscard]] static Rng derive(std::uint64_t seed, std::string_view tag);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1).
    double uniform() noexcept;
    /// Unbiased integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_index(std::uint64_t bound);
    double normal() noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Matrix gauss(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev);

template <typename T>
void shuffle(Rng& rng, std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(values[i - 1], values[j]);
    }
}

/// Stable descending order; ties keep the lower index first. NaN → non_finite.
std::vector<std::size_t> argsort_desc(std::span<const double> values);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

} // namespace augforget
