#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace scripta {

/// SHA-256 of a canonical configuration string; ties stored artifacts to the extraction setup.
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view text);
std::string to_hex(const Digest& digest);
Digest digest_from_hex(std::string_view hex);

}  // namespace scripta
