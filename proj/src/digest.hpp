#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace diffassim::detail {

/// 64-bit FNV-1a, rendered as 16 hex digits. Used for config digests.
inline std::string digest_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace diffassim::detail
