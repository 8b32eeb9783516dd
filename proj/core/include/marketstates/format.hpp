#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace marketstates {

/// Formats with 17 significant digits so the text parses back to the same double.
std::string format_real(double value);

/// FNV-1a 64-bit digest, rendered as 16 lowercase hex digits.
std::string content_hash(std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace marketstates
