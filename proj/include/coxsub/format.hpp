#pragma once

#include <charconv>
#include <string>

namespace coxsub {

/// Shortest decimal string that round-trips the double exactly (used by every
/// CSV writer so exported data re-imports bit-identically).
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace coxsub
