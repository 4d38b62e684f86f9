#pragma once

// Line-oriented helpers shared by the network, scheme, table and property
// readers. Internal to the library.

#include <cmath>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qnv/common.hpp"

namespace qnv::detail {

/// Yields non-blank lines that do not start with '#'. Lines of the form
/// `# @key value` seen along the way are collected as annotations.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::optional<std::string_view> next() {
        while (std::getline(in_, buf_)) {
            ++line_;
            const std::string_view s = trim(buf_);
            if (s.empty()) continue;
            if (s.front() == '#') {
                collect_annotation(s.substr(1));
                continue;
            }
            return s;
        }
        ++line_;
        return std::nullopt;
    }

    /// Like next(), but a missing line is a truncation error.
    std::string_view expect(std::string_view what) {
        auto s = next();
        if (!s) throw ParseError("truncated stream: expected " + std::string(what), line_);
        return *s;
    }

    std::size_t line() const { return line_; }

    bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

    struct Annotation {
        std::string key;
        std::string value;
        std::size_t line;
    };
    const std::vector<Annotation>& annotations() const { return annotations_; }

private:
    void collect_annotation(std::string_view s) {
        s = trim(s);
        if (s.empty() || s.front() != '@') return;
        s.remove_prefix(1);
        const auto sp = s.find_first_of(" \t");
        const std::string_view key = s.substr(0, sp);
        const std::string_view value = sp == std::string_view::npos ? std::string_view{} : trim(s.substr(sp));
        annotations_.push_back({std::string(key), std::string(value), line_});
    }

    std::istream& in_;
    std::string buf_;
    std::size_t line_ = 0;
    std::vector<Annotation> annotations_;
};

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

/// Parses a comma-separated list of exactly `count` values (any count when
/// `count` is negative) at the requested precision.
inline std::vector<double> parse_number_list(std::string_view s, long count, Precision precision,
                                             std::size_t line) {
    const auto fields = split(s, ',');
    if (count >= 0 && fields.size() != static_cast<std::size_t>(count)) {
        throw ParseError("expected " + std::to_string(count) + " values, found " + std::to_string(fields.size()),
                         line);
    }
    std::vector<double> values;
    values.reserve(fields.size());
    for (const auto f : fields) {
        std::optional<double> v;
        if (precision == Precision::Single) {
            if (auto fv = parse_float(f)) v = static_cast<double>(*fv);
        } else {
            v = parse_double(f);
        }
        if (!v) throw ParseError("malformed number '" + std::string(f) + "'", line);
        if (!std::isfinite(*v)) throw ParseError("non-finite value '" + std::string(f) + "'", line);
        values.push_back(*v);
    }
    return values;
}

inline std::string join_numbers(const double* data, std::size_t n, Precision precision) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ',';
        out += precision == Precision::Single ? format_number(static_cast<float>(data[i])) : format_number(data[i]);
    }
    return out;
}

}  // namespace qnv::detail
