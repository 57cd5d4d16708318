#include "augforget/data_aug.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace augforget {

void Dataset::validate() const {
    if (images.size() != labels.size()) {
        throw Error(ErrorKind::invalid_argument, "dataset has " + std::to_string(images.size()) + " images but " +
                                                     std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (labels[i] >= class_count) {
            throw Error(ErrorKind::invalid_argument, "label " + std::to_string(labels[i]) + " at record " +
                                                         std::to_string(i) + " exceeds class count");
        }
        if (images[i].size() != images.front().size()) {
            throw Error(ErrorKind::shape_mismatch, "record " + std::to_string(i) + " has shape " + images[i].shape());
        }
        for (const double v : images[i].data()) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error(ErrorKind::invalid_argument, "pixel outside [0,1] in record " + std::to_string(i));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> inflate_gzip(const std::vector<unsigned char>& packed, const std::filesystem::path& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
        throw Error(ErrorKind::io, path.string() + ": cannot initialise gzip decoder");
    }
    std::vector<unsigned char> out;
    std::vector<unsigned char> chunk(1 << 16);
    zs.next_in = const_cast<Bytef*>(packed.data());
    zs.avail_in = static_cast<uInt>(packed.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error(ErrorKind::truncated, path.string() + ": corrupt or truncated gzip stream");
        }
        out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw Error(ErrorKind::truncated, path.string() + ": gzip stream ends early");
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<unsigned char> read_payload(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, path.string() + ": cannot open");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) return inflate_gzip(bytes, path);
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) {
        throw Error(ErrorKind::truncated, path.string() + ": header truncated at byte " + std::to_string(bytes.size()));
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex;
    os.width(8);
    os.fill('0');
    os << v;
    return os.str();
}

void check_magic(std::uint32_t found, std::uint32_t expected, const std::filesystem::path& path) {
    if (found != expected) {
        throw Error(ErrorKind::bad_magic,
                    path.string() + ": magic " + hex32(found) + ", expected " + hex32(expected));
    }
}

void check_payload(std::size_t have, std::size_t need, const std::filesystem::path& path) {
    if (have < need) {
        throw Error(ErrorKind::truncated, path.string() + ": payload has " + std::to_string(have) +
                                              " bytes, header requires " + std::to_string(need));
    }
}

} // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t limit) {
    const auto image_bytes = read_payload(images_path);
    const auto label_bytes = read_payload(labels_path);

    check_magic(read_be32(image_bytes, 0, images_path), kImagesMagic, images_path);
    check_magic(read_be32(label_bytes, 0, labels_path), kLabelsMagic, labels_path);

    const std::size_t image_count = read_be32(image_bytes, 4, images_path);
    const std::size_t rows = read_be32(image_bytes, 8, images_path);
    const std::size_t cols = read_be32(image_bytes, 12, images_path);
    const std::size_t label_count = read_be32(label_bytes, 4, labels_path);

    check_payload(image_bytes.size() - 16, image_count * rows * cols, images_path);
    check_payload(label_bytes.size() - 8, label_count, labels_path);
    if (image_count != label_count) {
        throw Error(ErrorKind::count_mismatch, images_path.string() + " holds " + std::to_string(image_count) +
                                                   " images but " + labels_path.string() + " holds " +
                                                   std::to_string(label_count) + " labels");
    }

    const std::size_t keep = std::min(limit, image_count);
    Dataset ds;
    ds.images.reserve(keep);
    ds.labels.reserve(keep);
    const std::size_t pixels = rows * cols;
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < image_count; ++i) max_label = std::max<std::size_t>(max_label, label_bytes[8 + i]);
    for (std::size_t i = 0; i < keep; ++i) {
        Matrix img(rows, cols);
        const unsigned char* src = image_bytes.data() + 16 + i * pixels;
        auto dst = img.data();
        for (std::size_t p = 0; p < pixels; ++p) dst[p] = static_cast<double>(src[p]) / 255.0;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label_bytes[8 + i]);
    }
    ds.class_count = image_count == 0 ? 0 : max_label + 1;
    return ds;
}

Dataset take_prefix(const Dataset& ds, std::size_t count) {
    if (count > ds.size()) {
        throw Error(ErrorKind::invalid_argument,
                    "take_prefix(" + std::to_string(count) + ") on dataset of size " + std::to_string(ds.size()));
    }
    Dataset out;
    out.class_count = ds.class_count;
    out.images.assign(ds.images.begin(), ds.images.begin() + static_cast<std::ptrdiff_t>(count));
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

Matrix flatten_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    const std::size_t width = ds.feature_count();
    Matrix out(indices.size(), width);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = ds.images.at(indices[r]).data();
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

Matrix flatten_all(const Dataset& ds) {
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return flatten_batch(ds, all);
}

// ---------------------------------------------------------------------------
// Geometric transforms

namespace {

std::pair<double, double> sin_cos_degrees(double angle_deg) {
    double reduced = std::fmod(angle_deg, 360.0);
    if (reduced < 0) reduced += 360.0;
    if (reduced == 0.0) return {0.0, 1.0};
    if (reduced == 90.0) return {1.0, 0.0};
    if (reduced == 180.0) return {0.0, -1.0};
    if (reduced == 270.0) return {-1.0, 0.0};
    const double rad = angle_deg * std::numbers::pi / 180.0;
    return {std::sin(rad), std::cos(rad)};
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

} // namespace

Matrix rotate(const Matrix& img, double angle_deg) {
    const std::size_t h = img.rows();
    const std::size_t w = img.cols();
    const auto [s, c] = sin_cos_degrees(angle_deg);
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const auto hi = static_cast<long>(h);
    const auto wi = static_cast<long>(w);
    auto at = [&](long y, long x) -> double {
        if (y < 0 || x < 0 || y >= hi || x >= wi) return 0.0;
        return img(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };

    Matrix out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        const double dy = static_cast<double>(y) - cy;
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx;
            // Inverse of the clockwise map (dx, dy) -> (c*dx - s*dy, s*dx + c*dy).
            const double sx = cx + (c * dx + s * dy);
            const double sy = cy + (-s * dx + c * dy);
            const double fx0 = std::floor(sx);
            const double fy0 = std::floor(sy);
            const double fx = sx - fx0;
            const double fy = sy - fy0;
            const auto x0 = static_cast<long>(fx0);
            const auto y0 = static_cast<long>(fy0);
            const double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1);
            const double bottom = (1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1);
            out(y, x) = (1.0 - fy) * top + fy * bottom;
        }
    }
    return out;
}

Matrix hflip(const Matrix& img) {
    Matrix out(img.rows(), img.cols());
    for (std::size_t y = 0; y < img.rows(); ++y)
        for (std::size_t x = 0; x < img.cols(); ++x) out(y, x) = img(y, img.cols() - 1 - x);
    return out;
}

// ---------------------------------------------------------------------------
// Transforms

Transform Transform::rotation(double angle_deg) {
    if (!(angle_deg >= -180.0 && angle_deg <= 180.0)) {
        throw Error(ErrorKind::invalid_argument, "rotation angle must lie in [-180, 180]");
    }
    return {TransformKind::rotate, angle_deg};
}

Transform Transform::noise(double stddev) {
    if (!(stddev >= 0.0) || !std::isfinite(stddev)) {
        throw Error(ErrorKind::invalid_argument, "noise stddev must be finite and >= 0");
    }
    return {TransformKind::gauss_noise, stddev};
}

Transform Transform::brightness(double delta) {
    if (!(delta >= -1.0 && delta <= 1.0)) throw Error(ErrorKind::invalid_argument, "brightness delta must lie in [-1, 1]");
    return {TransformKind::brightness, delta};
}

namespace {

double parse_number(std::string_view text, std::string_view context) {
    // std::from_chars for double is available in libstdc++ 11.
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw Error(ErrorKind::invalid_argument, "bad number '" + std::string(text) + "' in " + std::string(context));
    }
    return value;
}

std::string format_param(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace

Transform Transform::parse(std::string_view text) {
    text = trim(text);
    const auto colon = text.find(':');
    const std::string_view name = colon == std::string_view::npos ? text : text.substr(0, colon);
    const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    const bool has_arg = colon != std::string_view::npos;
    if (name == "identity" && !has_arg) return identity();
    if (name == "hflip" && !has_arg) return flip();
    if (has_arg) {
        if (name == "rotate") return rotation(parse_number(arg, text));
        if (name == "noise") return noise(parse_number(arg, text));
        if (name == "brightness") return brightness(parse_number(arg, text));
    }
    throw Error(ErrorKind::invalid_argument, "unknown transform '" + std::string(text) + "'");
}

std::string Transform::label() const {
    switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::hflip: return "hflip";
    case TransformKind::rotate: return "rotate:" + format_param(param);
    case TransformKind::gauss_noise: return "noise:" + format_param(param);
    case TransformKind::brightness: return "brightness:" + format_param(param);
    }
    return "?";
}

Matrix apply(const Transform& t, const Matrix& img, Rng& rng) {
    Matrix out;
    switch (t.kind) {
    case TransformKind::identity: return img;
    case TransformKind::hflip: return hflip(img);
    case TransformKind::rotate: out = rotate(img, t.param); break;
    case TransformKind::gauss_noise:
        out = img;
        if (t.param > 0.0) {
            for (double& v : out.data()) v += t.param * rng.normal();
        }
        break;
    case TransformKind::brightness:
        out = img;
        for (double& v : out.data()) v += t.param;
        break;
    }
    for (double& v : out.data()) v = clamp01(v);
    return out;
}

TransformSet::TransformSet(std::vector<Transform> transforms) : transforms_(std::move(transforms)) {
    if (transforms_.empty()) throw Error(ErrorKind::invalid_argument, "transform set must not be empty");
}

TransformSet TransformSet::parse(std::string_view text) {
    std::vector<Transform> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto token = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (!trim(token).empty()) out.push_back(Transform::parse(token));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return TransformSet(std::move(out));
}

std::string TransformSet::label() const {
    std::string out;
    for (std::size_t i = 0; i < transforms_.size(); ++i) {
        if (i) out += ',';
        out += transforms_[i].label();
    }
    return out;
}

bool TransformSet::overlaps(const TransformSet& other) const {
    for (const auto& t : transforms_)
        if (std::find(other.transforms_.begin(), other.transforms_.end(), t) != other.transforms_.end()) return true;
    return false;
}

TransformSet default_transform_set() {
    return TransformSet({Transform::identity(), Transform::rotation(15), Transform::rotation(-15),
                         Transform::rotation(45), Transform::rotation(-45), Transform::flip(), Transform::noise(0.1),
                         Transform::brightness(0.2), Transform::brightness(-0.2)});
}

// ---------------------------------------------------------------------------
// Policies

PolicyDistribution policy_uniform(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::invalid_argument, "uniform policy needs at least one transform");
    return {std::vector<double>(n, 1.0 / static_cast<double>(n)), 0.0};
}

PolicyDistribution policy_targeted(std::span<const double> losses, double beta) {
    if (losses.empty()) throw Error(ErrorKind::invalid_argument, "targeted policy needs at least one loss");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::invalid_argument, "beta must be finite and >= 0");
    for (const double l : losses) {
        if (!std::isfinite(l)) throw Error(ErrorKind::non_finite, "targeted policy given a non-finite loss");
    }
    if (beta == 0.0) return {policy_uniform(losses.size()).probs, 0.0};

    // Largest logit is -beta * min(loss).
    const double shift = -beta * *std::min_element(losses.begin(), losses.end());
    std::vector<double> probs(losses.size());
    double total = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        probs[i] = std::exp(-beta * losses[i] - shift);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return {std::move(probs), beta};
}

double entropy(const PolicyDistribution& p) {
    double h = 0.0;
    for (const double q : p.probs) {
        if (q > 0.0) h -= q * std::log(q);
    }
    return h;
}

std::pair<std::size_t, Transform> sample_transform(Rng& rng, const TransformSet& set, const PolicyDistribution& p) {
    if (p.probs.size() != set.size()) {
        throw Error(ErrorKind::shape_mismatch, "policy over " + std::to_string(p.probs.size()) +
                                                   " transforms used with a set of " + std::to_string(set.size()));
    }
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        if (p.probs[i] <= 0.0) continue;
        last_positive = i;
        cumulative += p.probs[i];
        if (u < cumulative) return {i, set[i]};
    }
    // Rounding left the total just under u.
    return {last_positive, set[last_positive]};
}

} // namespace augforget
