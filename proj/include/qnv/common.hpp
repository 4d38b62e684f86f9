#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace qnv {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using RowMatrixXd = RowMatrix<double>;

/// Collision-avoidance advisories, in the fixed score-column order.
enum class Action : std::uint8_t { COC = 0, WL = 1, WR = 2, SL = 3, SR = 4 };

inline constexpr std::size_t kNumActions = 5;
inline constexpr std::array<std::string_view, kNumActions> kActionNames = {"COC", "WL", "WR", "SL", "SR"};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

enum class Precision : std::uint8_t { Single, Double };

std::string_view precision_name(Precision p);
std::optional<Precision> parse_precision(std::string_view name);

/// Error raised by every text-format reader. Carries the 1-based line (and
/// column, when known) of the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
std::size_t argmax(const Eigen::DenseBase<Derived>& scores) {
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores(i) > scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
    }
    return best;
}

// Shortest decimal text that parses back to the same bits.
/// Exact equality that is false, rather than undefined, on a shape mismatch.
template <typename A, typename B>
bool same_values(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.derived().array() == b.derived().array()).all();
}

std::string format_number(double v);
std::string format_number(float v);

// Strict parsers: the whole token must be consumed.
std::optional<double> parse_double(std::string_view text);
std::optional<float> parse_float(std::string_view text);

std::string_view trim(std::string_view s);

/// Uniform double in [0, 1) from the top 53 bits of one draw; the same on
/// every standard library, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng);

}  // namespace qnv
