#pragma once

#include <iosfwd>

namespace augforget::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

/// Subcommands: train, evil-twin, taylor, cka, ablate, info.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace augforget::cli
