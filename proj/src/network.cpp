#include "qnv/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "text_io.hpp"

namespace qnv {

namespace {

// Samples per evaluation tile. One tile of a 100-wide layer stays in L1.
constexpr Eigen::Index kTile = 64;

bool all_finite(const auto& m) { return m.allFinite(); }

/// out[o][s] = relu?(sum_i w[o][i] * in[i][s] + b[o]) for a feature-major
/// tile. The sum is accumulated in ascending i, and the inner loop runs over
/// independent samples, so vectorising it does not reorder any sum.
template <typename Scalar>
void affine_tile(const AffineLayer<Scalar>& layer, const Scalar* in, Scalar* out, Eigen::Index cols, bool relu) {
    const Eigen::Index n_in = layer.in_dim();
    const Eigen::Index n_out = layer.out_dim();
    for (Eigen::Index o = 0; o < n_out; ++o) {
        Scalar* __restrict acc = out + o * kTile;
        std::fill(acc, acc + cols, Scalar(0));
        const Scalar* w = layer.weights.data() + o * n_in;
        for (Eigen::Index i = 0; i < n_in; ++i) {
            const Scalar wi = w[i];
            const Scalar* __restrict a = in + i * kTile;
            for (Eigen::Index s = 0; s < cols; ++s) acc[s] += wi * a[s];
        }
        const Scalar b = layer.biases[o];
        if (relu) {
            for (Eigen::Index s = 0; s < cols; ++s) {
                const Scalar v = acc[s] + b;
                acc[s] = v > Scalar(0) ? v : Scalar(0);
            }
        } else {
            for (Eigen::Index s = 0; s < cols; ++s) acc[s] += b;
        }
    }
}

}  // namespace

Normalization Normalization::identity(Eigen::Index n) { return {VectorXd::Zero(n), VectorXd::Ones(n)}; }

Network::Network(std::vector<AffineLayer<double>> layers, Precision precision, Normalization normalization,
                 NetworkMetadata metadata)
    : layers_(std::move(layers)),
      precision_(precision),
      normalization_(std::move(normalization)),
      metadata_(std::move(metadata)) {
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.in_dim() < 1 || layer.out_dim() < 1) {
            throw std::invalid_argument("layer " + std::to_string(l) + " has an empty dimension");
        }
        if (layer.biases.size() != layer.out_dim()) {
            throw std::invalid_argument("layer " + std::to_string(l) + " bias length does not match its width");
        }
        if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
            throw DimensionError("layer " + std::to_string(l) + " input width " +
                                        std::to_string(layer.in_dim()) + " does not match previous output width " +
                                        std::to_string(layers_[l - 1].out_dim()));
        }
        if (!all_finite(layer.weights) || !all_finite(layer.biases)) {
            throw std::invalid_argument("layer " + std::to_string(l) + " has a non-finite parameter");
        }
    }
    const Eigen::Index n = input_dim();
    if (normalization_.means.size() == 0 && normalization_.ranges.size() == 0) {
        normalization_ = Normalization::identity(n);
    }
    if (normalization_.means.size() != n || normalization_.ranges.size() != n) {
        throw std::invalid_argument("normalization length does not match the input width");
    }
    if (!all_finite(normalization_.means) || !all_finite(normalization_.ranges) ||
        (normalization_.ranges.array() == 0.0).any()) {
        throw std::invalid_argument("normalization must be finite with non-zero ranges");
    }

    if (precision_ == Precision::Single) {
        // Round once; the stored doubles are then exactly the float parameters.
        for (auto& layer : layers_) layer = layer.cast<float>().cast<double>();
        normalization_.means = normalization_.means.cast<float>().cast<double>();
        normalization_.ranges = normalization_.ranges.cast<float>().cast<double>();
        single_layers_.reserve(layers_.size());
        for (const auto& layer : layers_) single_layers_.push_back(layer.cast<float>());
        for (const auto& layer : single_layers_) {
            if (!all_finite(layer.weights) || !all_finite(layer.biases)) {
                throw std::invalid_argument("parameter overflows single precision");
            }
        }
    }
}

std::vector<Eigen::Index> Network::widths() const {
    std::vector<Eigen::Index> w{input_dim()};
    for (const auto& layer : layers_) w.push_back(layer.out_dim());
    return w;
}

VectorXd Network::forward(const VectorXd& x) const {
    RowMatrixXd xs = x.transpose();
    RowMatrixXd out(1, output_dim());
    forward_batch_into(xs, out);
    return out.row(0).transpose();
}

RowMatrixXd Network::forward_batch(const RowMatrixXd& xs) const {
    RowMatrixXd out(xs.rows(), output_dim());
    forward_batch_into(xs, out);
    return out;
}

void Network::forward_batch_into(const RowMatrixXd& xs, RowMatrixXd& out) const {
    if (xs.cols() != input_dim()) {
        throw DimensionError("input width " + std::to_string(xs.cols()) + " does not match network input " +
                             std::to_string(input_dim()));
    }
    if (out.rows() != xs.rows() || out.cols() != output_dim()) out.resize(xs.rows(), output_dim());
    if (!xs.allFinite()) throw std::invalid_argument("network input must be finite");
    if (precision_ == Precision::Single) {
        run_batch(single_layers_, xs, out);
    } else {
        run_batch(layers_, xs, out);
    }
}

template <typename Scalar>
void Network::run_batch(const std::vector<AffineLayer<Scalar>>& layers, const RowMatrixXd& xs,
                        RowMatrixXd& out) const {
    Eigen::Index max_width = input_dim();
    for (const auto& layer : layers) max_width = std::max(max_width, layer.out_dim());
    std::vector<Scalar> buf_a(static_cast<std::size_t>(max_width * kTile));
    std::vector<Scalar> buf_b(static_cast<std::size_t>(max_width * kTile));
    const Vector<Scalar> means = normalization_.means.cast<Scalar>();
    const Vector<Scalar> ranges = normalization_.ranges.cast<Scalar>();
    const Eigen::Index n = input_dim();
    const Eigen::Index m = output_dim();

    for (Eigen::Index start = 0; start < xs.rows(); start += kTile) {
        const Eigen::Index cols = std::min(kTile, xs.rows() - start);
        Scalar* cur = buf_a.data();
        Scalar* nxt = buf_b.data();
        for (Eigen::Index s = 0; s < cols; ++s) {
            for (Eigen::Index i = 0; i < n; ++i) {
                cur[i * kTile + s] = (static_cast<Scalar>(xs(start + s, i)) - means[i]) / ranges[i];
            }
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            affine_tile(layers[l], cur, nxt, cols, l + 1 < layers.size());
            std::swap(cur, nxt);
        }
        for (Eigen::Index s = 0; s < cols; ++s) {
            for (Eigen::Index o = 0; o < m; ++o) out(start + s, o) = static_cast<double>(cur[o * kTile + s]);
        }
    }
}

std::vector<VectorXd> Network::pre_activations(const VectorXd& x) const {
    if (x.size() != input_dim()) throw DimensionError("input width does not match network input");
    std::vector<VectorXd> out;
    VectorXd h = (x - normalization_.means).cwiseQuotient(normalization_.ranges);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        VectorXd z = layers_[l].weights * h + layers_[l].biases;
        out.push_back(z);
        h = l + 1 < layers_.size() ? VectorXd(z.cwiseMax(0.0)) : z;
    }
    return out;
}

bool Network::operator==(const Network& other) const {
    return precision_ == other.precision_ && layers_ == other.layers_ && normalization_ == other.normalization_ &&
           metadata_ == other.metadata_;
}

std::vector<AffineLayer<double>> zero_layers(std::span<const Eigen::Index> widths) {
    if (widths.size() < 2) throw std::invalid_argument("need at least input and output widths");
    std::vector<AffineLayer<double>> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.push_back({RowMatrixXd::Zero(widths[i + 1], widths[i]), VectorXd::Zero(widths[i + 1])});
    }
    return layers;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

// A short final row means the stream was cut off mid-record.
std::vector<double> read_values(detail::LineReader& reader, long count, Precision precision,
                                const std::string& what) {
    const auto line = reader.expect(what);
    if (reader.at_eof() && static_cast<long>(detail::split(line, ',').size()) < count) {
        throw ParseError("truncated stream: incomplete " + what, reader.line());
    }
    return detail::parse_number_list(line, count, precision, reader.line());
}

}  // namespace

Network load_network(std::istream& in) {
    detail::LineReader reader(in);

    auto line = reader.expect("layer count");
    const auto layer_count = parse_double(line);
    if (!layer_count || *layer_count < 1 || *layer_count != std::floor(*layer_count) || *layer_count > 1e6) {
        throw ParseError("malformed header: layer count must be a positive integer", reader.line());
    }
    const auto num_layers = static_cast<long>(*layer_count);

    line = reader.expect("layer widths");
    std::vector<Eigen::Index> widths;
    for (const double w : detail::parse_number_list(line, num_layers + 1, Precision::Double, reader.line())) {
        if (w < 1 || w != std::floor(w) || w > 1e7) {
            throw ParseError("malformed header: widths must be positive integers", reader.line());
        }
        widths.push_back(static_cast<Eigen::Index>(w));
    }

    line = reader.expect("precision tag");
    const auto precision = parse_precision(line);
    if (!precision) throw ParseError("malformed header: unknown precision '" + std::string(line) + "'", reader.line());

    const long n = static_cast<long>(widths.front());
    Normalization norm;
    line = reader.expect("normalization means");
    auto means = detail::parse_number_list(line, n, *precision, reader.line());
    line = reader.expect("normalization ranges");
    auto ranges = detail::parse_number_list(line, n, *precision, reader.line());
    norm.means = Eigen::Map<VectorXd>(means.data(), n);
    norm.ranges = Eigen::Map<VectorXd>(ranges.data(), n);
    if ((norm.ranges.array() == 0.0).any()) throw ParseError("normalization range of zero", reader.line());

    std::vector<AffineLayer<double>> layers;
    for (long l = 0; l < num_layers; ++l) {
        const Eigen::Index rows = widths[static_cast<std::size_t>(l) + 1];
        const Eigen::Index cols = widths[static_cast<std::size_t>(l)];
        AffineLayer<double> layer{RowMatrixXd(rows, cols), VectorXd(rows)};
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto row = read_values(reader, static_cast<long>(cols), *precision, "weights of layer " + std::to_string(l));
            for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = row[static_cast<std::size_t>(c)];
        }
        const auto b = read_values(reader, static_cast<long>(rows), *precision, "biases of layer " + std::to_string(l));
        for (Eigen::Index r = 0; r < rows; ++r) layer.biases[r] = b[static_cast<std::size_t>(r)];
        layers.push_back(std::move(layer));
    }
    if (auto extra = reader.next()) throw ParseError("unexpected trailing data", reader.line());

    NetworkMetadata meta;
    for (const auto& a : reader.annotations()) {
        if (a.key == "name") {
            meta.name = a.value;
        } else if (a.key == "tau") {
            const auto tau = parse_double(a.value);
            if (!tau) throw ParseError("malformed tau annotation", a.line);
            meta.tau = *tau;
        } else if (a.key == "alpha_prev") {
            meta.alpha_prev = parse_action(a.value);
            if (!meta.alpha_prev) throw ParseError("unknown action '" + a.value + "'", a.line);
        }
    }
    return Network(std::move(layers), *precision, std::move(norm), std::move(meta));
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file " + path);
    return load_network(in);
}

void save_network(const Network& net, std::ostream& out) {
    for (const auto& layer : net.layers()) {
        if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
            throw std::invalid_argument("refusing to save a network with non-finite parameters");
        }
    }
    const Precision p = net.precision();
    const auto& meta = net.metadata();
    out << "# qnv network\n";
    if (!meta.name.empty()) out << "# @name " << meta.name << '\n';
    out << "# @tau " << format_number(meta.tau) << '\n';
    if (meta.alpha_prev) out << "# @alpha_prev " << action_name(*meta.alpha_prev) << '\n';
    out << net.num_layers() << '\n';
    const auto widths = net.widths();
    for (std::size_t i = 0; i < widths.size(); ++i) out << (i ? "," : "") << widths[i];
    out << '\n' << precision_name(p) << '\n';
    const auto& norm = net.normalization();
    out << detail::join_numbers(norm.means.data(), static_cast<std::size_t>(norm.means.size()), p) << '\n';
    out << detail::join_numbers(norm.ranges.data(), static_cast<std::size_t>(norm.ranges.size()), p) << '\n';
    for (const auto& layer : net.layers()) {
        for (Eigen::Index r = 0; r < layer.out_dim(); ++r) {
            out << detail::join_numbers(layer.weights.row(r).data(), static_cast<std::size_t>(layer.in_dim()), p)
                << '\n';
        }
        out << detail::join_numbers(layer.biases.data(), static_cast<std::size_t>(layer.out_dim()), p) << '\n';
    }
}

void save_network_file(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write network file " + path);
    save_network(net, out);
    if (!out) throw std::runtime_error("error writing network file " + path);
}

}  // namespace qnv
