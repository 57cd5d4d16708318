#include "augforget/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace augforget {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::bad_magic: return "bad_magic";
    case ErrorKind::bad_version: return "bad_version";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::count_mismatch: return "count_mismatch";
    case ErrorKind::size_mismatch: return "size_mismatch";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw Error(ErrorKind::shape_mismatch, "matrix " + shape_string(rows, cols) + " given " +
                                                   std::to_string(data_.size()) + " values");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw Error(ErrorKind::shape_mismatch, "ragged row list");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

std::string Matrix::shape() const { return shape_string(rows_, cols_); }

Matrix Matrix::transposed() const { return transpose(view()); }

Matrix transpose(MatrixView v) {
    Matrix t(v.cols, v.rows);
    for (std::size_t r = 0; r < v.rows; ++r)
        for (std::size_t c = 0; c < v.cols; ++c) t(c, r) = v(r, c);
    return t;
}

std::string shape_string(std::size_t rows, std::size_t cols) {
    std::ostringstream os;
    os << rows << 'x' << cols;
    return os.str();
}

// ---------------------------------------------------------------------------
// Products

void gemm_accumulate(MatrixView a, MatrixView b, std::span<double> out) {
    if (a.cols != b.rows || out.size() != a.rows * b.cols) {
        throw Error(ErrorKind::shape_mismatch,
                    "matmul " + shape_string(a.rows, a.cols) + " by " + shape_string(b.rows, b.cols));
    }
    const std::size_t n = b.cols;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* __restrict c_row = out.data() + i * n;
        const double* a_row = a.data.data() + i * a.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a_row[k];
            if (aik == 0.0) continue;
            const double* __restrict b_row = b.data.data() + k * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += aik * b_row[j];
        }
    }
}

void gemm_tn_accumulate(MatrixView a, MatrixView b, std::span<double> out) {
    if (a.rows != b.rows || out.size() != a.cols * b.cols) {
        throw Error(ErrorKind::shape_mismatch, "matmul transpose(" + shape_string(a.rows, a.cols) + ") by " +
                                                   shape_string(b.rows, b.cols));
    }
    const std::size_t n = b.cols;
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* a_row = a.data.data() + k * a.cols;
        const double* __restrict b_row = b.data.data() + k * n;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a_row[i];
            if (aki == 0.0) continue;
            double* __restrict c_row = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += aki * b_row[j];
        }
    }
}

Matrix matmul(MatrixView a, MatrixView b) {
    if (a.cols != b.rows) {
        throw Error(ErrorKind::shape_mismatch,
                    "matmul " + shape_string(a.rows, a.cols) + " by " + shape_string(b.rows, b.cols));
    }
    Matrix out(a.rows, b.cols);
    gemm_accumulate(a, b, out.data());
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) { return matmul(a.view(), b.view()); }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::shape_mismatch,
                    "dot of lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Rng

namespace {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

Rng Rng::derive(std::uint64_t seed, std::string_view tag) {
    std::uint64_t state = seed ^ fnv1a(tag);
    return Rng(splitmix64(state));
}

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
    if (bound == 0) throw Error(ErrorKind::invalid_argument, "uniform_index bound must be positive");
    // Lemire's nearly-divisionless rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Matrix gauss(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev) {
    if (!(stddev >= 0.0) || !std::isfinite(stddev) || !std::isfinite(mean)) {
        throw Error(ErrorKind::invalid_argument, "gauss requires finite mean and stddev >= 0");
    }
    Matrix out(rows, cols, mean);
    if (stddev == 0.0) return out;
    for (double& v : out.data()) v = mean + stddev * rng.normal();
    return out;
}

std::vector<std::size_t> argsort_desc(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i])) {
            throw Error(ErrorKind::non_finite, "argsort_desc: NaN at index " + std::to_string(i));
        }
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return order;
}

} // namespace augforget
