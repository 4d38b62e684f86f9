#include "qnv/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include "text_io.hpp"

namespace qnv {

namespace {

constexpr double kStepTolerance = 1e-9;

// round(v) as an integer when v is within kStepTolerance of one.
std::optional<std::int64_t> near_integer(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) > kStepTolerance * std::max(1.0, std::abs(v))) return std::nullopt;
    if (std::abs(r) > 9.0e15) return std::nullopt;
    return static_cast<std::int64_t>(r);
}

}  // namespace

// ---------------------------------------------------------------------------
// AxisQuant

AxisQuant::AxisQuant(std::string label, std::string unit, std::variant<UniformAxis, ExplicitAxis> kind)
    : label_(std::move(label)), unit_(std::move(unit)), kind_(std::move(kind)) {
    if (label_.empty() || label_.find_first_of(" \t\n") != std::string::npos) {
        throw std::invalid_argument("axis label must be a non-empty word");
    }
    if (unit_.empty() || unit_.find_first_of(" \t\n") != std::string::npos) {
        throw std::invalid_argument("axis unit must be a non-empty word");
    }
}

AxisQuant AxisQuant::uniform(std::string label, std::string unit, double step, double bias, double lo, double hi) {
    if (!std::isfinite(step) || !std::isfinite(bias) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw std::invalid_argument("uniform axis parameters must be finite");
    }
    if (!(step > 0.0)) throw std::invalid_argument("uniform axis step must be positive");
    if (lo > hi) throw std::invalid_argument("uniform axis needs lo <= hi");
    const auto j_lo = near_integer((lo - bias) / step);
    const auto j_hi = near_integer((hi - bias) / step);
    if (!j_lo || !j_hi) throw std::invalid_argument("uniform axis bounds must be quantized values bias + j*step");
    AxisQuant axis(std::move(label), std::move(unit), UniformAxis{step, bias, lo, hi});
    axis.first_step_ = *j_lo;
    axis.size_ = static_cast<std::size_t>(*j_hi - *j_lo + 1);
    return axis;
}

AxisQuant AxisQuant::explicit_values(std::string label, std::string unit, std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("explicit axis needs at least one value");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw std::invalid_argument("explicit axis values must be finite");
        if (i > 0 && !(values[i - 1] < values[i])) {
            throw std::invalid_argument("explicit axis values must be strictly increasing");
        }
    }
    const std::size_t n = values.size();
    AxisQuant axis(std::move(label), std::move(unit), ExplicitAxis{std::move(values)});
    axis.size_ = n;
    return axis;
}

double AxisQuant::value(std::size_t j) const {
    if (j >= size_) throw std::out_of_range("axis index out of range");
    if (const auto* u = as_uniform()) {
        return u->bias + static_cast<double>(first_step_ + static_cast<std::int64_t>(j)) * u->step;
    }
    return as_explicit()->values[j];
}

std::vector<double> AxisQuant::values() const {
    std::vector<double> v(size_);
    for (std::size_t j = 0; j < size_; ++j) v[j] = value(j);
    return v;
}

std::size_t AxisQuant::quantize_index(double x) const {
    if (const auto* u = as_uniform()) {
        const double k = std::round((x - u->bias) / u->step);
        const double lo = static_cast<double>(first_step_);
        const double hi = static_cast<double>(first_step_) + static_cast<double>(size_ - 1);
        return static_cast<std::size_t>(std::clamp(k, lo, hi) - lo);
    }
    const auto& v = as_explicit()->values;
    const auto it = std::upper_bound(v.begin(), v.end(), x);
    if (it == v.begin()) return 0;
    if (it == v.end()) return v.size() - 1;
    const auto i = static_cast<std::size_t>(it - v.begin());
    return (x - v[i - 1]) <= (v[i] - x) ? i - 1 : i;
}

std::optional<std::size_t> AxisQuant::index_of(double v) const {
    if (!std::isfinite(v)) return std::nullopt;
    const std::size_t j = quantize_index(v);
    if (value(j) != v) return std::nullopt;
    return j;
}

double quantize_scalar(const AxisQuant& axis, double x) { return axis.quantize(x); }

// ---------------------------------------------------------------------------
// QuantScheme

QuantScheme::QuantScheme(std::vector<AxisQuant> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw std::invalid_argument("quantization scheme needs at least one axis");
    strides_.assign(axes_.size(), 1);
    std::uint64_t total = 1;
    for (std::size_t i = axes_.size(); i-- > 0;) {
        strides_[i] = total;
        const std::uint64_t k = axes_[i].size();
        if (total > std::numeric_limits<std::uint64_t>::max() / k) {
            throw std::overflow_error("grid size overflows a 64-bit count");
        }
        total *= k;
    }
    grid_size_ = total;
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        for (std::size_t j = i + 1; j < axes_.size(); ++j) {
            if (axes_[i].label() == axes_[j].label()) {
                throw std::invalid_argument("duplicate axis label '" + axes_[i].label() + "'");
            }
        }
    }
}

std::optional<std::size_t> QuantScheme::find_axis(std::string_view label) const {
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        if (axes_[i].label() == label) return i;
    }
    return std::nullopt;
}

std::uint64_t grid_size(const QuantScheme& scheme) { return scheme.grid_size(); }

VectorXd quantize_point(const QuantScheme& scheme, const VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != scheme.dims()) {
        throw DimensionError("point has " + std::to_string(x.size()) + " dimensions, scheme has " +
                             std::to_string(scheme.dims()));
    }
    VectorXd q(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) q[i] = scheme.axis(static_cast<std::size_t>(i)).quantize(x[i]);
    return q;
}

GridIndex unflatten(const QuantScheme& scheme, std::uint64_t flat) {
    if (flat >= scheme.grid_size()) throw std::out_of_range("flat index outside the grid");
    GridIndex idx{std::vector<std::size_t>(scheme.dims()), flat};
    std::uint64_t rest = flat;
    for (std::size_t i = 0; i < scheme.dims(); ++i) {
        idx.dims[i] = static_cast<std::size_t>(rest / scheme.strides()[i]);
        rest %= scheme.strides()[i];
    }
    return idx;
}

std::uint64_t flatten(const QuantScheme& scheme, const std::vector<std::size_t>& dims) {
    if (dims.size() != scheme.dims()) throw DimensionError("index has the wrong number of dimensions");
    std::uint64_t flat = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] >= scheme.axis(i).size()) throw std::out_of_range("axis index outside the grid");
        flat += dims[i] * scheme.strides()[i];
    }
    return flat;
}

VectorXd index_to_point(const QuantScheme& scheme, const GridIndex& idx) {
    if (flatten(scheme, idx.dims) != idx.flat) throw std::invalid_argument("inconsistent grid index");
    VectorXd x(static_cast<Eigen::Index>(scheme.dims()));
    for (std::size_t i = 0; i < scheme.dims(); ++i) x[static_cast<Eigen::Index>(i)] = scheme.axis(i).value(idx.dims[i]);
    return x;
}

VectorXd index_to_point(const QuantScheme& scheme, std::uint64_t flat) {
    return index_to_point(scheme, unflatten(scheme, flat));
}

GridIndex point_to_index(const QuantScheme& scheme, const VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != scheme.dims()) throw DimensionError("point has the wrong dimension");
    std::vector<std::size_t> dims(scheme.dims());
    for (std::size_t i = 0; i < scheme.dims(); ++i) {
        const auto j = scheme.axis(i).index_of(x[static_cast<Eigen::Index>(i)]);
        if (!j) {
            throw std::invalid_argument("value " + format_number(x[static_cast<Eigen::Index>(i)]) +
                                        " is not on axis '" + scheme.axis(i).label() + "'");
        }
        dims[i] = *j;
    }
    const std::uint64_t flat = flatten(scheme, dims);
    return {std::move(dims), flat};
}

void fill_grid_points(const QuantScheme& scheme, std::uint64_t first, RowMatrixXd& out) {
    const auto n = static_cast<Eigen::Index>(scheme.dims());
    if (out.cols() != n) throw DimensionError("output width does not match the scheme");
    if (out.rows() == 0) return;
    if (first + static_cast<std::uint64_t>(out.rows()) > scheme.grid_size()) {
        throw std::out_of_range("grid range past the end");
    }
    // Odometer over the per-axis indices, starting at `first`.
    GridIndex idx = unflatten(scheme, first);
    std::vector<std::vector<double>> values;
    for (const auto& axis : scheme.axes()) values.push_back(axis.values());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index i = 0; i < n; ++i) out(r, i) = values[static_cast<std::size_t>(i)][idx.dims[static_cast<std::size_t>(i)]];
        for (std::size_t i = scheme.dims(); i-- > 0;) {
            if (++idx.dims[i] < values[i].size()) break;
            idx.dims[i] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// StateSet

StateSet::StateSet(const QuantScheme& scheme, std::vector<IndexRange> ranges)
    : ranges_(std::move(ranges)), strides_(scheme.strides()) {
    if (ranges_.size() != scheme.dims()) throw DimensionError("state ranges do not match the scheme");
    radix_strides_.assign(ranges_.size(), 1);
    std::uint64_t total = 1;
    for (std::size_t i = ranges_.size(); i-- > 0;) {
        if (ranges_[i].last > scheme.axis(i).size()) throw std::out_of_range("state range outside the axis");
        radix_strides_[i] = total;
        total *= ranges_[i].size();
    }
    size_ = total;
}

GridIndex StateSet::at(std::uint64_t ordinal) const {
    if (ordinal >= size_) throw std::out_of_range("state ordinal out of range");
    GridIndex idx{std::vector<std::size_t>(ranges_.size()), 0};
    std::uint64_t rest = ordinal;
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
        idx.dims[i] = ranges_[i].first + static_cast<std::size_t>(rest / radix_strides_[i]);
        rest %= radix_strides_[i];
        idx.flat += idx.dims[i] * strides_[i];
    }
    return idx;
}

std::uint64_t StateSet::flat_at(std::uint64_t ordinal) const {
    if (ordinal >= size_) throw std::out_of_range("state ordinal out of range");
    std::uint64_t flat = 0;
    std::uint64_t rest = ordinal;
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
        flat += (ranges_[i].first + rest / radix_strides_[i]) * strides_[i];
        rest %= radix_strides_[i];
    }
    return flat;
}

bool StateSet::contains(const GridIndex& idx) const {
    if (idx.dims.size() != ranges_.size()) return false;
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
        if (!ranges_[i].contains(idx.dims[i])) return false;
    }
    return true;
}

bool StateSet::contains_flat(std::uint64_t flat) const {
    std::uint64_t rest = flat;
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
        if (!ranges_[i].contains(static_cast<std::size_t>(rest / strides_[i]))) return false;
        rest %= strides_[i];
    }
    return true;
}

StateSet states_for_property(const QuantScheme& scheme, const Box& box, BoxMode mode, double slack) {
    if (box.size() != scheme.dims()) {
        throw DimensionError("box has " + std::to_string(box.size()) + " intervals, scheme has " +
                             std::to_string(scheme.dims()) + " axes");
    }
    if (!(slack >= 0.0) || !std::isfinite(slack)) throw std::invalid_argument("slack must be finite and >= 0");
    std::vector<IndexRange> ranges;
    for (std::size_t i = 0; i < box.size(); ++i) {
        if (!std::isfinite(box[i].lo) || !std::isfinite(box[i].hi)) {
            throw std::invalid_argument("box bounds must be finite");
        }
        if (box[i].lo > box[i].hi) {
            throw std::invalid_argument("inverted interval on axis '" + scheme.axis(i).label() + "'");
        }
        const AxisQuant& axis = scheme.axis(i);
        const double lo = box[i].lo - slack;
        const double hi = box[i].hi + slack;
        if (mode == BoxMode::QuantizedImage) {
            // q is monotone and its cells tile the line, so the image of
            // [lo, hi] is every value from q(lo) to q(hi).
            ranges.push_back({axis.quantize_index(lo), axis.quantize_index(hi) + 1});
        } else {
            std::size_t first = axis.quantize_index(lo);
            if (axis.value(first) < lo) ++first;
            std::size_t last = axis.quantize_index(hi) + 1;
            if (axis.value(last - 1) > hi) --last;
            ranges.push_back({first, std::max(first, last)});
        }
    }
    return StateSet(scheme, std::move(ranges));
}

Box full_box(const QuantScheme& scheme) {
    Box box;
    for (const auto& axis : scheme.axes()) box.push_back({axis.front(), axis.back()});
    return box;
}

// ---------------------------------------------------------------------------
// DenseLUT

namespace {

// Greatest common step of two positive reals that are both close to integer
// multiples of it; zero when the Euclidean remainder never settles.
double real_gcd(double a, double b, double tol) {
    for (int iter = 0; iter < 200; ++iter) {
        if (b <= tol) return a;
        double r = std::fmod(a, b);
        if (b - r <= tol) r = 0.0;
        a = b;
        b = r;
    }
    return 0.0;
}

}  // namespace

DenseLUT build_dense_lut(const AxisQuant& axis, double min_step, std::size_t max_entries) {
    DenseLUT lut(axis);
    if (const auto* u = axis.as_uniform()) {
        lut.dense_ = true;
        lut.gcd_step_ = u->step;
        lut.cell_ = u->step;
        lut.table_ = axis.values();
        return lut;
    }
    const auto& v = axis.as_explicit()->values;
    if (v.size() == 1) {
        lut.dense_ = true;
        lut.table_ = v;
        return lut;
    }
    const double span = v.back() - v.front();
    const double tol = kStepTolerance * std::max(1.0, std::max(std::abs(v.front()), std::abs(v.back())));
    double g = v[1] - v[0];
    for (std::size_t i = 2; i < v.size() && g > 0.0; ++i) g = real_gcd(std::max(g, v[i] - v[i - 1]), std::min(g, v[i] - v[i - 1]), tol);
    if (!(g >= min_step) || !(g > 0.0)) {
        lut.note_ = "axis values are not commensurable with a step >= " + format_number(min_step);
        return lut;
    }
    for (const double x : v) {
        if (!near_integer(x / g)) {
            lut.note_ = "axis values are not integer multiples of " + format_number(g);
            return lut;
        }
    }
    const double cell = g / 2.0;
    const double cells = span / cell + 1.0;
    if (cells > static_cast<double>(max_entries)) {
        lut.note_ = "dense table would need " + format_number(cells) + " entries";
        return lut;
    }
    lut.dense_ = true;
    lut.gcd_step_ = g;
    lut.cell_ = cell;
    lut.first_ = static_cast<std::int64_t>(std::round(v.front() / cell));
    const auto last = static_cast<std::int64_t>(std::round(v.back() / cell));
    lut.table_.reserve(static_cast<std::size_t>(last - lut.first_ + 1));
    for (std::int64_t j = lut.first_; j <= last; ++j) {
        // Entry j covers ((j-1)*cell, j*cell]; sample its interior.
        const double probe = j == lut.first_ ? v.front() : (static_cast<double>(j) - 0.5) * cell;
        lut.table_.push_back(axis.quantize(probe));
    }
    return lut;
}

double DenseLUT::lookup(double x) const {
    if (!dense_) return axis_.quantize(x);
    if (axis_.is_uniform()) return table_[axis_.quantize_index(x)];
    if (table_.size() == 1) return table_.front();
    const auto last = first_ + static_cast<std::int64_t>(table_.size()) - 1;
    const double lo_edge = static_cast<double>(first_) * cell_;
    const double hi_edge = static_cast<double>(last) * cell_;
    if (!(x > lo_edge)) return table_.front();
    if (x > hi_edge) return table_.back();
    auto j = static_cast<std::int64_t>(std::ceil(x / cell_));
    // x / cell_ is rounded; settle the cell with exact comparisons.
    if (static_cast<double>(j) * cell_ < x) ++j;
    if (static_cast<double>(j - 1) * cell_ >= x) --j;
    j = std::clamp(j, first_, last);
    return table_[static_cast<std::size_t>(j - first_)];
}

// ---------------------------------------------------------------------------
// Scheme file format: one axis per line,
//   <name> <unit> uniform <step> <bias> <lo> <hi>
//   <name> <unit> explicit v1,v2,...

namespace {

AxisQuant parse_axis_line(std::string_view line, std::size_t line_no) {
    const auto fields = detail::split_ws(line);
    if (fields.size() < 3) throw ParseError("axis line needs '<name> <unit> uniform|explicit ...'", line_no);
    const std::string name(fields[0]);
    const std::string unit(fields[1]);
    try {
        if (fields[2] == "uniform") {
            if (fields.size() != 7) throw ParseError("uniform axis needs <step> <bias> <lo> <hi>", line_no);
            double p[4];
            for (int i = 0; i < 4; ++i) {
                const auto v = parse_double(fields[3 + static_cast<std::size_t>(i)]);
                if (!v) throw ParseError("malformed number '" + std::string(fields[3 + static_cast<std::size_t>(i)]) + "'", line_no);
                p[i] = *v;
            }
            return AxisQuant::uniform(name, unit, p[0], p[1], p[2], p[3]);
        }
        if (fields[2] == "explicit") {
            // Values may contain spaces after commas; rejoin everything after the kind.
            const auto pos = line.find("explicit");
            auto values = detail::parse_number_list(trim(line.substr(pos + 8)), -1, Precision::Double, line_no);
            return AxisQuant::explicit_values(name, unit, std::move(values));
        }
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line_no);
    }
    throw ParseError("unknown axis kind '" + std::string(fields[2]) + "'", line_no);
}

}  // namespace

namespace detail {

QuantScheme read_scheme_lines(LineReader& reader, std::size_t count) {
    std::vector<AxisQuant> axes;
    for (std::size_t i = 0; i < count; ++i) {
        const auto line = reader.expect("axis definition");
        axes.push_back(parse_axis_line(line, reader.line()));
    }
    try {
        return QuantScheme(std::move(axes));
    } catch (const std::exception& e) {
        throw ParseError(e.what(), reader.line());
    }
}

}  // namespace detail

QuantScheme load_scheme(std::istream& in) {
    detail::LineReader reader(in);
    std::vector<AxisQuant> axes;
    while (auto line = reader.next()) axes.push_back(parse_axis_line(*line, reader.line()));
    if (axes.empty()) throw ParseError("scheme file has no axes", reader.line());
    try {
        return QuantScheme(std::move(axes));
    } catch (const std::exception& e) {
        throw ParseError(e.what(), reader.line());
    }
}

QuantScheme load_scheme_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scheme file " + path);
    return load_scheme(in);
}

void save_scheme(const QuantScheme& scheme, std::ostream& out) {
    for (const auto& axis : scheme.axes()) {
        out << axis.label() << ' ' << axis.unit() << ' ';
        if (const auto* u = axis.as_uniform()) {
            out << "uniform " << format_number(u->step) << ' ' << format_number(u->bias) << ' '
                << format_number(u->lo) << ' ' << format_number(u->hi) << '\n';
        } else {
            const auto& v = axis.as_explicit()->values;
            out << "explicit " << detail::join_numbers(v.data(), v.size(), Precision::Double) << '\n';
        }
    }
}

void save_scheme_file(const QuantScheme& scheme, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scheme file " + path);
    save_scheme(scheme, out);
}

const std::vector<double>& cas_rho_values() {
    static const std::vector<double> values = {
        0,    50,   100,  200,  300,  400,   500,   600,   700,   800,   900,   1000,  1200,  1400,  1700,  2000,
        2600, 3300, 4200, 5300, 7100, 8500, 10700, 13500, 17000, 21400, 27000, 34000, 39000, 44000, 50000, 56000};
    return values;
}

QuantScheme cas_scheme() {
    constexpr double pi = std::numbers::pi;
    const double angle_step = 2.0 * pi / 40.0;
    return QuantScheme({
        AxisQuant::explicit_values("rho", "m", cas_rho_values()),
        AxisQuant::uniform("theta", "rad", angle_step, -pi, -pi, pi),
        AxisQuant::uniform("psi", "rad", angle_step, -pi, -pi, pi),
        AxisQuant::uniform("v_own", "m/s", 50.0, 0.0, 50.0, 200.0),
        AxisQuant::uniform("v_int", "m/s", 50.0, 0.0, 50.0, 200.0),
    });
}

}  // namespace qnv
