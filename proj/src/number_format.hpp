#ifndef LANFIT_NUMBER_FORMAT_HPP
#define LANFIT_NUMBER_FORMAT_HPP

#include <charconv>
#include <cstdio>
#include <string>

namespace lanfit::detail {

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

// Fixed significant digits for human-facing tables.
inline std::string format_sig(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

} // namespace lanfit::detail

#endif
