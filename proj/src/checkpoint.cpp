#include "augforget/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace augforget {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFFu);
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xFFu);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    void need(std::size_t n, std::size_t expected_total, const char* what) const {
        if (pos_ + n > bytes_.size()) {
            throw Error(ErrorKind::truncated, std::string("checkpoint truncated in ") + what + ": expected " +
                                                  std::to_string(expected_total) + " bytes, found " +
                                                  std::to_string(bytes_.size()));
        }
    }

    std::uint64_t le(int width) {
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
    [[nodiscard]] std::size_t size() const noexcept { return bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const Mlp& model) {
    std::string out = "AFCK";
    put_u32(out, checkpoint_version);
    put_u32(out, static_cast<std::uint32_t>(model.layer_sizes().size()));
    for (const auto s : model.layer_sizes()) put_u32(out, static_cast<std::uint32_t>(s));
    for (const double v : model.params()) put_f64(out, v);
    return out;
}

Mlp decode_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    r.need(4, 12, "magic");
    if (bytes.substr(0, 4) != "AFCK") throw Error(ErrorKind::bad_magic, "checkpoint magic is not AFCK");
    r.le(4);
    r.need(8, 12, "header");
    const auto version = r.le(4);
    if (version != checkpoint_version) {
        throw Error(ErrorKind::bad_version, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(checkpoint_version));
    }
    const auto count = r.le(4);
    if (count < 2) throw Error(ErrorKind::size_mismatch, "checkpoint declares " + std::to_string(count) + " layer sizes");
    r.need(4 * count, 12 + 4 * count, "layer sizes");
    std::vector<std::size_t> sizes;
    for (std::uint64_t i = 0; i < count; ++i) {
        sizes.push_back(static_cast<std::size_t>(r.le(4)));
        if (sizes.back() == 0) throw Error(ErrorKind::size_mismatch, "checkpoint declares a zero layer size");
    }
    const std::size_t n = parameter_count(sizes);
    const std::size_t expected = r.pos() + 8 * n;
    r.need(8 * n, expected, "parameters");
    if (r.size() != expected) {
        throw Error(ErrorKind::size_mismatch, "checkpoint holds " + std::to_string(r.size()) + " bytes, layer sizes imply " +
                                                  std::to_string(expected));
    }
    std::vector<double> params(n);
    for (auto& v : params) v = std::bit_cast<double>(r.le(8));
    Mlp model(sizes);
    model.set_flat_params(params);
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const Mlp& model) {
    const std::string bytes = encode_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, path.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, path.string() + ": write failed");
}

Mlp load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, path.string() + ": cannot open for reading");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_checkpoint(bytes);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

} // namespace augforget
