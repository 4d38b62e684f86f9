#pragma once

// Shared fixtures and brute-force oracles. The oracles deliberately avoid the
// library's own index arithmetic: they scan value lists and grid points one
// at a time.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "qnv/enum_verifier.hpp"
#include "qnv/network.hpp"
#include "qnv/property.hpp"
#include "qnv/quantizer.hpp"

namespace qnv::test {

inline std::string data_path(const std::string& name) { return std::string(QNV_DATA_DIR) + "/" + name; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Fresh scratch directory per call, removed by the destructor.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("qnv_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + unit_uniform(rng) * (hi - lo); }

inline std::vector<AffineLayer<double>> random_layers(std::mt19937_64& rng, const std::vector<Eigen::Index>& widths,
                                                      double scale = 1.0) {
    std::vector<AffineLayer<double>> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        AffineLayer<double> layer{RowMatrixXd(widths[l + 1], widths[l]), VectorXd(widths[l + 1])};
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = uniform(rng, -scale, scale);
            layer.biases[r] = uniform(rng, -scale, scale);
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

inline Network random_network(std::mt19937_64& rng, const std::vector<Eigen::Index>& widths,
                              Precision p = Precision::Double, double scale = 1.0) {
    return Network(random_layers(rng, widths, scale), p);
}

// Same scores everywhere: zero weights, biases = scores.
inline Network constant_network(const std::vector<double>& scores, Eigen::Index n = 5,
                                Precision p = Precision::Single) {
    const auto m = static_cast<Eigen::Index>(scores.size());
    AffineLayer<double> layer{RowMatrixXd::Zero(m, n), Eigen::Map<const VectorXd>(scores.data(), m)};
    return Network({layer}, p);
}

inline Network constant_network(Action winner, Eigen::Index n = 5) {
    std::vector<double> s(kNumActions, 0.0);
    s[static_cast<std::size_t>(winner)] = 1.0;
    return constant_network(s, n);
}

// Uniform axes x0, x1, ... with values 0, 1, ..., size-1.
inline QuantScheme toy_scheme(const std::vector<std::size_t>& sizes) {
    std::vector<AxisQuant> axes;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        axes.push_back(AxisQuant::uniform("x" + std::to_string(i), "u", 1.0, 0.0, 0.0,
                                          static_cast<double>(sizes[i] - 1)));
    }
    return QuantScheme(std::move(axes));
}

// Random scheme mixing explicit and uniform axes with at most `max_states`.
inline QuantScheme random_scheme(std::mt19937_64& rng, std::size_t dims, std::uint64_t max_states) {
    std::vector<AxisQuant> axes;
    const auto per_axis = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(max_states), 1.0 / static_cast<double>(dims))));
    for (std::size_t i = 0; i < dims; ++i) {
        const std::size_t k = 1 + static_cast<std::size_t>(rng() % std::max<std::size_t>(1, per_axis));
        const std::string name = "d" + std::to_string(i);
        if (rng() % 2 == 0) {
            std::vector<double> vals;
            double v = uniform(rng, -2.0, 0.0);
            for (std::size_t j = 0; j < k; ++j) {
                vals.push_back(v);
                v += uniform(rng, 0.05, 1.0);
            }
            axes.push_back(AxisQuant::explicit_values(name, "u", vals));
        } else {
            const double step = uniform(rng, 0.1, 0.7);
            const double bias = uniform(rng, -1.0, 1.0);
            const auto first = static_cast<int>(rng() % 5) - 2;
            axes.push_back(AxisQuant::uniform(name, "u", step, bias, bias + first * step,
                                              bias + (first + static_cast<int>(k) - 1) * step));
        }
    }
    return QuantScheme(std::move(axes));
}

inline bool bits_equal(const RowMatrixXd& a, const RowMatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

inline bool bits_equal(const VectorXd& a, const VectorXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

// Nearest axis value by linear scan over the value list; the first
// (lowest) value wins a tie.
inline double nearest_by_scan(const std::vector<double>& values, double x) {
    double best = values.front();
    for (const double v : values) {
        if (std::abs(v - x) < std::abs(best - x)) best = v;
    }
    return best;
}

// Does the Voronoi cell of values[j] meet [lo, hi]? Cells are bounded by
// midpoints of neighbours; the outermost cells are unbounded.
inline bool voronoi_meets(const std::vector<double>& values, std::size_t j, double lo, double hi) {
    const double inf = std::numeric_limits<double>::infinity();
    const double cell_lo = j == 0 ? -inf : (values[j - 1] + values[j]) / 2.0;
    const double cell_hi = j + 1 == values.size() ? inf : (values[j] + values[j + 1]) / 2.0;
    return cell_lo <= hi && cell_hi >= lo;
}

struct OracleResult {
    std::uint64_t states = 0;
    std::vector<std::uint64_t> violations;  // ascending flat index
};

// Loops over every grid point, decides membership from the raw values and
// evaluates the network one point at a time.
inline bool oracle_selects(const QuantScheme& scheme, const Property& prop, const VectorXd& point) {
    for (std::size_t i = 0; i < scheme.dims(); ++i) {
        const Interval iv = prop.input_box[i];
        const double v = point[static_cast<Eigen::Index>(i)];
        if (prop.mode == BoxMode::InBox) {
            if (!(iv.lo - prop.slack <= v && v <= iv.hi + prop.slack)) return false;
        } else {
            const auto values = scheme.axis(i).values();
            std::size_t j = 0;
            while (values[j] != v) ++j;
            if (!voronoi_meets(values, j, iv.lo - prop.slack, iv.hi + prop.slack)) return false;
        }
    }
    return true;
}

inline OracleResult brute_force_verify(const Network& net, const QuantScheme& scheme, const Property& prop) {
    OracleResult res;
    std::vector<std::vector<double>> values;
    for (const auto& axis : scheme.axes()) values.push_back(axis.values());
    std::vector<std::size_t> idx(scheme.dims(), 0);
    VectorXd point(static_cast<Eigen::Index>(scheme.dims()));
    for (std::uint64_t flat = 0; flat < scheme.grid_size(); ++flat) {
        for (std::size_t i = 0; i < idx.size(); ++i) point[static_cast<Eigen::Index>(i)] = values[i][idx[i]];
        if (oracle_selects(scheme, prop, point)) {
            ++res.states;
            if (!check_output(prop.output, net.forward(point))) res.violations.push_back(flat);
        }
        // Row-major odometer: last axis fastest.
        for (std::size_t i = idx.size(); i-- > 0;) {
            if (++idx[i] < values[i].size()) break;
            idx[i] = 0;
        }
    }
    return res;
}

inline std::vector<std::uint64_t> cex_flats(const Verdict& v) {
    std::vector<std::uint64_t> out;
    for (const auto& c : v.counterexamples) out.push_back(c.index.flat);
    return out;
}

// A box inside the scheme's range, each side independently random.
inline Box random_box(std::mt19937_64& rng, const QuantScheme& scheme) {
    Box box;
    for (const auto& axis : scheme.axes()) {
        const double span = axis.back() - axis.front();
        const double a = uniform(rng, axis.front() - 0.1 * span, axis.back() + 0.1 * span);
        const double b = uniform(rng, axis.front() - 0.1 * span, axis.back() + 0.1 * span);
        box.push_back({std::min(a, b), std::max(a, b)});
    }
    return box;
}

inline OutputPredicate random_predicate(std::mt19937_64& rng, int depth = 2) {
    auto action = [&] { return static_cast<Action>(rng() % kNumActions); };
    const auto pick = rng() % (depth > 0 ? 7 : 4);
    switch (pick) {
        case 0:
            return OutputPredicate::argmax_is(action());
        case 1: {
            std::vector<Action> set;
            for (std::size_t a = 0; a < kNumActions; ++a) {
                if (rng() % 2) set.push_back(static_cast<Action>(a));
            }
            if (set.empty()) set.push_back(action());
            return OutputPredicate::argmax_in(set);
        }
        case 2:
            return OutputPredicate::score(action(), rng() % 2 ? Comparison::Le : Comparison::Ge,
                                          std::round(uniform(rng, -2, 2) * 100) / 100);
        case 3: {
            const Action a = action();
            Action b = action();
            while (b == a) b = action();
            return OutputPredicate::score_diff(a, b, rng() % 2 ? Comparison::Le : Comparison::Ge,
                                               std::round(uniform(rng, -1, 1) * 100) / 100);
        }
        case 4:
            return OutputPredicate::all_of({random_predicate(rng, depth - 1), random_predicate(rng, depth - 1)});
        case 5:
            return OutputPredicate::any_of({random_predicate(rng, depth - 1), random_predicate(rng, depth - 1)});
        default:
            return OutputPredicate::negate(random_predicate(rng, depth - 1));
    }
}

inline Property make_property(std::string name, Box box, OutputPredicate out, BoxMode mode = BoxMode::InBox) {
    Property p;
    p.name = std::move(name);
    p.input_box = std::move(box);
    p.output = std::move(out);
    p.mode = mode;
    return p;
}

}  // namespace qnv::test
