#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace animallm {

// SHA-256 of the input bytes, as a lowercase hex string.
std::string sha256_hex(std::string_view bytes);

// First 8 digest bytes of SHA-256(bytes), big-endian. Stable across
// platforms, unlike std::hash; used wherever the harness needs a
// deterministic content-derived integer (mock provider, manifest ids).
std::uint64_t stable_hash64(std::string_view bytes);

}  // namespace animallm
