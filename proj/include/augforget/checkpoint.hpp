#pragma once

#include "augforget/model.hpp"

#include <filesystem>
#include <string>

namespace augforget {

/// "AFCK", u32 version (1), u32 layer count, u32 sizes, then every parameter as
/// f64, all little-endian, in canonical flat order.
inline constexpr std::uint32_t checkpoint_version = 1;

std::string encode_checkpoint(const Mlp& model);
/// Throws bad_magic, bad_version, truncated or size_mismatch; never returns a partial model.
Mlp decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Mlp& model);
Mlp load_checkpoint(const std::filesystem::path& path);

} // namespace augforget
