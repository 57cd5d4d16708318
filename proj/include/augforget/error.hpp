#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace augforget {

enum class ErrorKind {
    invalid_argument,
    shape_mismatch,
    non_finite,
    bad_magic,
    bad_version,
    truncated,
    count_mismatch,
    size_mismatch,
    io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure in the library is reported through this type; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace augforget
