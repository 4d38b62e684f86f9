#pragma once

#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "qnv/common.hpp"

namespace qnv {

struct UniformAxis {
    double step = 1.0;
    double bias = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const UniformAxis&) const = default;
};

struct ExplicitAxis {
    std::vector<double> values;  // strictly increasing

    bool operator==(const ExplicitAxis&) const = default;
};

/// Quantizer for one input dimension.
///
/// Uniform axes round (x - bias) / step half away from zero and clamp to
/// [lo, hi]. Explicit axes map x to the nearest listed value; a point exactly
/// between two values maps to the lower one. Either way the result is a
/// member of the axis value set, and every axis value maps to itself.
class AxisQuant {
public:
    static AxisQuant uniform(std::string label, std::string unit, double step, double bias, double lo, double hi);
    static AxisQuant explicit_values(std::string label, std::string unit, std::vector<double> values);

    const std::string& label() const { return label_; }
    const std::string& unit() const { return unit_; }
    bool is_uniform() const { return std::holds_alternative<UniformAxis>(kind_); }
    const UniformAxis* as_uniform() const { return std::get_if<UniformAxis>(&kind_); }
    const ExplicitAxis* as_explicit() const { return std::get_if<ExplicitAxis>(&kind_); }

    std::size_t size() const { return size_; }
    double value(std::size_t j) const;
    double front() const { return value(0); }
    double back() const { return value(size_ - 1); }
    std::vector<double> values() const;

    std::size_t quantize_index(double x) const;
    double quantize(double x) const { return value(quantize_index(x)); }

    /// Index of `v` when it is exactly an axis value.
    std::optional<std::size_t> index_of(double v) const;

    bool operator==(const AxisQuant&) const = default;

private:
    AxisQuant(std::string label, std::string unit, std::variant<UniformAxis, ExplicitAxis> kind);

    std::string label_;
    std::string unit_;
    std::variant<UniformAxis, ExplicitAxis> kind_;
    std::int64_t first_step_ = 0;  // uniform: lo == bias + first_step_ * step
    std::size_t size_ = 0;
};

double quantize_scalar(const AxisQuant& axis, double x);

/// Per-dimension product quantizer. Grid points are flattened row-major in
/// declared axis order (the last axis varies fastest).
class QuantScheme {
public:
    explicit QuantScheme(std::vector<AxisQuant> axes);

    std::size_t dims() const { return axes_.size(); }
    const std::vector<AxisQuant>& axes() const { return axes_; }
    const AxisQuant& axis(std::size_t i) const { return axes_.at(i); }
    std::optional<std::size_t> find_axis(std::string_view label) const;

    std::uint64_t grid_size() const { return grid_size_; }
    const std::vector<std::uint64_t>& strides() const { return strides_; }

    bool operator==(const QuantScheme& o) const { return axes_ == o.axes_; }

private:
    std::vector<AxisQuant> axes_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t grid_size_ = 0;
};

struct GridIndex {
    std::vector<std::size_t> dims;
    std::uint64_t flat = 0;

    bool operator==(const GridIndex&) const = default;
};

std::uint64_t grid_size(const QuantScheme& scheme);
VectorXd quantize_point(const QuantScheme& scheme, const VectorXd& x);

GridIndex unflatten(const QuantScheme& scheme, std::uint64_t flat);
std::uint64_t flatten(const QuantScheme& scheme, const std::vector<std::size_t>& dims);
VectorXd index_to_point(const QuantScheme& scheme, const GridIndex& idx);
VectorXd index_to_point(const QuantScheme& scheme, std::uint64_t flat);
GridIndex point_to_index(const QuantScheme& scheme, const VectorXd& x);

/// Writes the grid points with flat indices [first, first + out.rows()) into
/// the rows of `out`.
void fill_grid_points(const QuantScheme& scheme, std::uint64_t first, RowMatrixXd& out);

// ---------------------------------------------------------------------------
// State enumeration for a box constraint

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return lo <= x && x <= hi; }
    double width() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

using Box = std::vector<Interval>;

/// InBox: grid values lying inside the box. QuantizedImage: every grid value
/// q(x) for some x in the box, i.e. every value whose quantization cell
/// meets the interval.
enum class BoxMode : std::uint8_t { InBox, QuantizedImage };

/// Half-open range [first, last) of axis indices.
struct IndexRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const { return last > first ? last - first : 0; }
    bool contains(std::size_t j) const { return first <= j && j < last; }
    bool operator==(const IndexRange&) const = default;
};

/// Cartesian product of per-axis index ranges, enumerated in ascending flat
/// index order.
class StateSet {
public:
    StateSet(const QuantScheme& scheme, std::vector<IndexRange> ranges);

    std::uint64_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    const std::vector<IndexRange>& ranges() const { return ranges_; }

    /// Grid index of the `ordinal`-th state, ordinal in [0, size()).
    GridIndex at(std::uint64_t ordinal) const;
    std::uint64_t flat_at(std::uint64_t ordinal) const;
    bool contains(const GridIndex& idx) const;
    bool contains_flat(std::uint64_t flat) const;

    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = GridIndex;
        using difference_type = std::ptrdiff_t;
        using pointer = void;
        using reference = GridIndex;

        iterator() = default;
        iterator(const StateSet* set, std::uint64_t ordinal) : set_(set), ordinal_(ordinal) {}
        GridIndex operator*() const { return set_->at(ordinal_); }
        iterator& operator++() {
            ++ordinal_;
            return *this;
        }
        iterator operator++(int) {
            auto tmp = *this;
            ++ordinal_;
            return tmp;
        }
        bool operator==(const iterator& o) const { return ordinal_ == o.ordinal_; }

    private:
        const StateSet* set_ = nullptr;
        std::uint64_t ordinal_ = 0;
    };

    iterator begin() const { return {this, 0}; }
    iterator end() const { return {this, size_}; }

private:
    std::vector<IndexRange> ranges_;
    std::vector<std::uint64_t> strides_;
    std::vector<std::uint64_t> radix_strides_;
    std::uint64_t size_ = 0;
};

/// Every state of `scheme` selected by `box` under `mode`. The box is first
/// widened by `slack` on both sides.
StateSet states_for_property(const QuantScheme& scheme, const Box& box, BoxMode mode = BoxMode::InBox,
                             double slack = 0.0);

/// The box covering every axis from its lowest to its highest value.
Box full_box(const QuantScheme& scheme);

// ---------------------------------------------------------------------------
// Table-indexed quantization

/// Quantizer for one axis by direct table indexing.
///
/// For an explicit axis whose values are integer multiples of a common step
/// g, every midpoint between adjacent values is a multiple of g/2. The table
/// therefore holds one entry per half-open cell ((j-1)g/2, jg/2], inside
/// which the nearest value is constant, and lookup is exact rather than an
/// approximation. A uniform axis uses its own rounding index directly.
class DenseLUT {
public:
    bool dense() const { return dense_; }
    double gcd_step() const { return gcd_step_; }
    double cell() const { return cell_; }
    const std::vector<double>& table() const { return table_; }
    /// Why the dense path was not taken; empty when dense().
    const std::string& note() const { return note_; }

    double lookup(double x) const;

private:
    friend DenseLUT build_dense_lut(const AxisQuant&, double, std::size_t);

    explicit DenseLUT(AxisQuant axis) : axis_(std::move(axis)) {}

    AxisQuant axis_;
    bool dense_ = false;
    double gcd_step_ = 0.0;
    double cell_ = 0.0;
    std::int64_t first_ = 0;  // cell index of table_[0]
    std::vector<double> table_;
    std::string note_;
};

DenseLUT build_dense_lut(const AxisQuant& axis, double min_step = 1e-9, std::size_t max_entries = std::size_t{1} << 24);

// ---------------------------------------------------------------------------
// Scheme file format and the documented collision-avoidance scheme

QuantScheme load_scheme(std::istream& in);
QuantScheme load_scheme_file(const std::string& path);
void save_scheme(const QuantScheme& scheme, std::ostream& out);
void save_scheme_file(const QuantScheme& scheme, const std::string& path);

/// Reads `count` axis lines from an open reader; shared with the table format.
namespace detail {
class LineReader;
QuantScheme read_scheme_lines(LineReader& reader, std::size_t count);
}  // namespace detail

/// 32 nonuniform distances over [0, 56000] m.
const std::vector<double>& cas_rho_values();

/// rho, theta, psi, v_own, v_int: 32 x 41 x 41 x 4 x 4 = 860,672 states.
QuantScheme cas_scheme();

}  // namespace qnv
