#include "qnv/trainer.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace qnv {

void TrainConfig::validate() const {
    if (epochs > 1'000'000) throw std::invalid_argument("epochs is unreasonably large");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning_rate must be positive");
    }
    if (!(asym_weight >= 1.0) || !std::isfinite(asym_weight)) throw std::invalid_argument("asym_weight must be >= 1");
    if (shape.size() < 2) throw std::invalid_argument("shape needs input and output widths");
    if (shape.front() != 5 || shape.back() != 5) throw std::invalid_argument("shape must start and end with 5");
    for (const auto w : shape) {
        if (w < 1) throw std::invalid_argument("shape widths must be positive");
    }
}

TrainingDiverged::TrainingDiverged(std::size_t epoch, double loss)
    : std::runtime_error("training diverged in epoch " + std::to_string(epoch) + " (loss " + format_number(loss) +
                         ")"),
      epoch_(epoch) {}

namespace {

void shuffle(std::vector<std::uint64_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

Normalization axis_normalization(const QuantScheme& scheme) {
    const auto n = static_cast<Eigen::Index>(scheme.dims());
    Normalization norm{VectorXd(n), VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& axis = scheme.axis(static_cast<std::size_t>(i));
        const double lo = axis.front();
        const double hi = axis.back();
        norm.means[i] = lo + (hi - lo) / 2.0;
        norm.ranges[i] = hi > lo ? (hi - lo) / 2.0 : 1.0;
    }
    return norm;
}

RowMatrixXd normalize(const RowMatrixXd& raw, const Normalization& norm) {
    return (raw.rowwise() - norm.means.transpose()).array().rowwise() / norm.ranges.transpose().array();
}

RowMatrixXd grid_inputs(const QuantScheme& scheme) {
    RowMatrixXd x(static_cast<Eigen::Index>(scheme.grid_size()), static_cast<Eigen::Index>(scheme.dims()));
    fill_grid_points(scheme, 0, x);
    return x;
}

std::vector<AffineLayer<double>> init_layers(const TrainConfig& cfg, std::mt19937_64& rng) {
    auto layers = zero_layers(cfg.shape);
    for (auto& layer : layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = (2.0 * unit_uniform(rng) - 1.0) * limit;
            }
        }
    }
    return layers;
}

NetworkMetadata table_metadata(const LookupTable& table) {
    return {"", table.tau, table.alpha_prev};
}

// Forward pass over pre-normalized rows, keeping every pre-activation.
std::vector<RowMatrixXd> forward_trace(std::span<const AffineLayer<double>> layers, const RowMatrixXd& inputs) {
    std::vector<RowMatrixXd> z;
    z.reserve(layers.size());
    RowMatrixXd h = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        RowMatrixXd zl = h * layers[l].weights.transpose();
        zl.rowwise() += layers[l].biases.transpose();
        if (l + 1 < layers.size()) h = zl.cwiseMax(0.0);
        z.push_back(std::move(zl));
    }
    return z;
}

double weighted_loss(const RowMatrixXd& y, const RowMatrixXd& t, double asym_weight, RowMatrixXd* grad) {
    const auto k = y.rows();
    const auto m = static_cast<double>(y.cols());
    if (grad) grad->resize(k, y.cols());
    std::vector<double> per_row(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) {
        const double w = argmax(y.row(i)) == argmax(t.row(i)) ? 1.0 : asym_weight;
        const auto diff = y.row(i) - t.row(i);
        per_row[static_cast<std::size_t>(i)] = w * diff.squaredNorm() / m;
        if (grad) grad->row(i) = diff * (2.0 * w / (m * static_cast<double>(k)));
    }
    return pairwise_sum(per_row) / static_cast<double>(k);
}

}  // namespace

LossAndGrad loss_and_grad(std::span<const AffineLayer<double>> layers, const RowMatrixXd& inputs,
                          const RowMatrixXd& targets, double asym_weight) {
    if (layers.empty()) throw std::invalid_argument("no layers");
    if (inputs.rows() == 0) throw std::invalid_argument("batch must be non-empty");
    if (inputs.rows() != targets.rows() || inputs.cols() != layers.front().in_dim() ||
        targets.cols() != layers.back().out_dim()) {
        throw DimensionError("batch shape does not match the network");
    }
    const auto z = forward_trace(layers, inputs);
    RowMatrixXd g;
    LossAndGrad out;
    out.loss = weighted_loss(z.back(), targets, asym_weight, &g);
    out.grads.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const RowMatrixXd h_prev = l == 0 ? inputs : RowMatrixXd(z[l - 1].cwiseMax(0.0));
        out.grads[l].weights = g.transpose() * h_prev;
        out.grads[l].biases = g.colwise().sum().transpose();
        if (l > 0) {
            RowMatrixXd back = g * layers[l].weights;
            g = (z[l - 1].array() > 0.0).select(back, 0.0);
        }
    }
    return out;
}

LossAndGrad loss_and_grad(const Network& net, const Batch& batch, double asym_weight) {
    if (batch.inputs.cols() != net.input_dim()) throw DimensionError("batch width does not match the network");
    return loss_and_grad(net.layers(), normalize(batch.inputs, net.normalization()), batch.targets, asym_weight);
}

Network initial_network(const LookupTable& table, const TrainConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    return Network(init_layers(cfg, rng), cfg.precision, axis_normalization(table.scheme), table_metadata(table));
}

double table_loss(const Network& net, const LookupTable& table, double asym_weight) {
    const RowMatrixXd x = normalize(grid_inputs(table.scheme), net.normalization());
    const auto z = forward_trace(net.layers(), x);
    return weighted_loss(z.back(), table.scores, asym_weight, nullptr);
}

Network train(const LookupTable& table, const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (static_cast<Eigen::Index>(table.scheme.dims()) != cfg.shape.front()) {
        throw DimensionError("table has " + std::to_string(table.scheme.dims()) + " inputs, shape starts with " +
                             std::to_string(cfg.shape.front()));
    }
    std::mt19937_64 rng(cfg.seed);
    std::vector<AffineLayer<double>> layers = init_layers(cfg, rng);
    const Normalization norm = axis_normalization(table.scheme);
    const RowMatrixXd inputs = normalize(grid_inputs(table.scheme), norm);
    const RowMatrixXd& targets = table.scores;
    const auto rows = static_cast<std::uint64_t>(inputs.rows());

    auto full_loss = [&] { return weighted_loss(forward_trace(layers, inputs).back(), targets, cfg.asym_weight, nullptr); };
    if (report) {
        report->epoch_loss.clear();
        report->initial_loss = full_loss();
    }

    std::vector<std::uint64_t> order(rows);
    std::iota(order.begin(), order.end(), std::uint64_t{0});
    RowMatrixXd bx;
    RowMatrixXd by;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        std::vector<double> batch_losses;
        for (std::uint64_t start = 0; start < rows; start += cfg.batch_size) {
            const auto k = static_cast<Eigen::Index>(std::min<std::uint64_t>(cfg.batch_size, rows - start));
            bx.resize(k, inputs.cols());
            by.resize(k, targets.cols());
            for (Eigen::Index r = 0; r < k; ++r) {
                const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::uint64_t>(r)]);
                bx.row(r) = inputs.row(src);
                by.row(r) = targets.row(src);
            }
            auto lg = loss_and_grad(layers, bx, by, cfg.asym_weight);
            if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch, lg.loss);
            batch_losses.push_back(lg.loss);
            for (std::size_t l = 0; l < layers.size(); ++l) {
                layers[l].weights -= cfg.learning_rate * lg.grads[l].weights;
                layers[l].biases -= cfg.learning_rate * lg.grads[l].biases;
            }
        }
        const double mean_loss = pairwise_sum(batch_losses) / static_cast<double>(std::max<std::size_t>(1, batch_losses.size()));
        for (const auto& layer : layers) {
            if (!layer.weights.allFinite() || !layer.biases.allFinite()) throw TrainingDiverged(epoch, mean_loss);
        }
        if (report) report->epoch_loss.push_back(mean_loss);
    }

    Network net(std::move(layers), cfg.precision, norm, table_metadata(table));
    if (report) report->final_loss = table_loss(net, table, cfg.asym_weight);
    return net;
}

}  // namespace qnv
