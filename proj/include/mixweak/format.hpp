#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace mixweak
{
    /// Round-trip-safe text for a double: 17 significant digits,
    /// general notation. Used for every emitted number so that golden files
    /// compare byte for byte.
    inline std::string format_double(double x)
    {
        if (std::isnan(x))
            return "nan";
        if (std::isinf(x))
            return x > 0 ? "inf" : "-inf";
        char buf[64];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
        if (ec != std::errc{})
            return "nan";
        return {buf, end};
    }

    /// Shortest text that reads back to the same double. Used in identifiers.
    inline std::string format_short(double x)
    {
        if (!std::isfinite(x))
            return format_double(x);
        char buf[64];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
        if (ec != std::errc{})
            return format_double(x);
        return {buf, end};
    }
}
