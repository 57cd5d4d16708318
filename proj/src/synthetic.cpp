#include "augforget/data_aug.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace augforget {

namespace {

struct Segment {
    double x0, y0, x1, y1;
};

// Seven-segment layout in a unit-width, two-unit-tall box: a b c d e f g.
constexpr std::array<Segment, 7> kSegments{{
    {0, 0, 1, 0}, // a: top
    {1, 0, 1, 1}, // b: upper right
    {1, 1, 1, 2}, // c: lower right
    {0, 2, 1, 2}, // d: bottom
    {0, 1, 0, 2}, // e: lower left
    {0, 0, 0, 1}, // f: upper left
    {0, 1, 1, 1}, // g: middle
}};

// Bit i set => segment i lit.
constexpr std::array<unsigned, 10> kDigitSegments{
    0b0111111, // 0: abcdef
    0b0000110, // 1: bc
    0b1011011, // 2: abged
    0b1001111, // 3: abgcd
    0b1100110, // 4: fgbc
    0b1101101, // 5: afgcd
    0b1111101, // 6: afgedc
    0b0000111, // 7: abc
    0b1111111, // 8
    0b1101111, // 9: abcdfg
};

double segment_distance(double px, double py, const Segment& s) {
    const double vx = s.x1 - s.x0;
    const double vy = s.y1 - s.y0;
    const double wx = px - s.x0;
    const double wy = py - s.y0;
    const double len2 = vx * vx + vy * vy;
    const double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
    const double dx = wx - t * vx;
    const double dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Matrix render_digit(Rng& rng, std::size_t digit, std::size_t side) {
    const double n = static_cast<double>(side);
    const double height = uniform_in(rng, 0.50, 0.70) * n;
    const double width = height * uniform_in(rng, 0.40, 0.60);
    const double slant = uniform_in(rng, -0.25, 0.25);
    const double thickness = uniform_in(rng, 0.8, 1.8);
    const double cx = (n - 1.0) / 2.0 + uniform_in(rng, -1.5, 1.5);
    const double cy = (n - 1.0) / 2.0 + uniform_in(rng, -1.5, 1.5);

    std::vector<Segment> strokes;
    for (std::size_t i = 0; i < kSegments.size(); ++i) {
        if (((kDigitSegments[digit] >> i) & 1U) == 0) continue;
        Segment s = kSegments[i];
        auto place = [&](double gx, double gy, double& ox, double& oy) {
            const double jx = uniform_in(rng, -0.06, 0.06);
            const double jy = uniform_in(rng, -0.06, 0.06);
            const double local_y = (gy + jy) / 2.0 - 0.5; // [-0.5, 0.5]
            const double local_x = (gx + jx) - 0.5;
            ox = cx + local_x * width - slant * local_y * height;
            oy = cy + local_y * height;
        };
        Segment placed{};
        place(s.x0, s.y0, placed.x0, placed.y0);
        place(s.x1, s.y1, placed.x1, placed.y1);
        strokes.push_back(placed);
    }

    Matrix img(side, side);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            double d = 1e9;
            for (const auto& s : strokes) d = std::min(d, segment_distance(static_cast<double>(x), static_cast<double>(y), s));
            img(y, x) = std::clamp(thickness + 0.5 - d, 0.0, 1.0);
        }
    }
    return img;
}

} // namespace

Dataset make_synthetic_digits(Rng& rng, std::size_t count, std::size_t side) {
    if (side < 8) throw Error(ErrorKind::invalid_argument, "synthetic glyphs need at least 8x8 pixels");
    Dataset ds;
    ds.class_count = 10;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto digit = static_cast<std::size_t>(rng.uniform_index(10));
        ds.images.push_back(render_digit(rng, digit, side));
        ds.labels.push_back(digit);
    }
    return ds;
}

} // namespace augforget
