#include "qnv/common.hpp"

#include <charconv>

namespace qnv {

std::string_view action_name(Action a) { return kActionNames.at(static_cast<std::size_t>(a)); }

std::optional<Action> parse_action(std::string_view name) {
    for (std::size_t i = 0; i < kNumActions; ++i) {
        if (kActionNames[i] == name) return static_cast<Action>(i);
    }
    return std::nullopt;
}

std::string_view precision_name(Precision p) { return p == Precision::Single ? "single" : "double"; }

std::optional<Precision> parse_precision(std::string_view name) {
    if (name == "single") return Precision::Single;
    if (name == "double") return Precision::Double;
    return std::nullopt;
}

namespace {

std::string make_message(const std::string& what, std::size_t line, std::size_t column) {
    std::string msg = "line " + std::to_string(line);
    if (column != 0) msg += ", column " + std::to_string(column);
    return msg + ": " + what;
}

template <typename T>
std::string format_shortest(T v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf.data(), end);
}

template <typename T>
std::optional<T> parse_strict(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    T value{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) return std::nullopt;
    return value;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(make_message(what, line, column)), line_(line), column_(column) {}

std::string format_number(double v) { return format_shortest(v); }
std::string format_number(float v) { return format_shortest(v); }

std::optional<double> parse_double(std::string_view text) { return parse_strict<double>(text); }
std::optional<float> parse_float(std::string_view text) { return parse_strict<float>(text); }

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace qnv
