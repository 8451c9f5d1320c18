#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "aoisched/error.hpp"

namespace aoisched {

/// Shortest decimal form that parses back to the same double, so artifact
/// bytes are a pure function of the values.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Prefixes every line of `text` with "# ", forming the comment header that
/// carries the resolved configuration into each artifact.
inline std::string comment_block(const std::string& text) {
    std::string out;
    out.reserve(text.size() + text.size() / 16 + 8);
    bool at_line_start = true;
    for (char c : text) {
        if (at_line_start) {
            out += "# ";
            at_line_start = false;
        }
        out += c;
        if (c == '\n') at_line_start = true;
    }
    if (!out.empty() && out.back() != '\n') out += '\n';
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("failed while writing output file: " + path);
}

}  // namespace aoisched
