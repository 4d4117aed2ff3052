#pragma once

#include <charconv>
#include <string>

namespace barecam {

// Shortest round-trip decimal form, locale independent. Used everywhere a
// float lands in a text artifact so reruns stay byte identical.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace barecam
