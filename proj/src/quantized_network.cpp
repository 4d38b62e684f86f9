#include "qnv/quantized_network.hpp"

namespace qnv {

QuantizedNetwork::QuantizedNetwork(Network net, QuantScheme scheme) : net_(std::move(net)), scheme_(std::move(scheme)) {
    if (static_cast<Eigen::Index>(scheme_.dims()) != net_.input_dim()) {
        throw DimensionError("scheme has " + std::to_string(scheme_.dims()) + " axes, network takes " +
                             std::to_string(net_.input_dim()) + " inputs");
    }
    luts_.reserve(scheme_.dims());
    for (const auto& axis : scheme_.axes()) luts_.push_back(build_dense_lut(axis));
}

void QuantizedNetwork::quantize_into(const RowMatrixXd& xs, RowMatrixXd& out) const {
    if (xs.cols() != static_cast<Eigen::Index>(luts_.size())) {
        throw DimensionError("input has " + std::to_string(xs.cols()) + " columns, scheme has " +
                             std::to_string(luts_.size()) + " axes");
    }
    out.resize(xs.rows(), xs.cols());
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
        for (Eigen::Index c = 0; c < xs.cols(); ++c) out(r, c) = luts_[static_cast<std::size_t>(c)].lookup(xs(r, c));
    }
}

VectorXd QuantizedNetwork::forward(const VectorXd& x) const {
    return net_.forward(quantize_point(scheme_, x));
}

RowMatrixXd QuantizedNetwork::forward_batch(const RowMatrixXd& xs) const {
    RowMatrixXd scratch;
    RowMatrixXd out;
    forward_batch_into(xs, scratch, out);
    return out;
}

void QuantizedNetwork::forward_batch_into(const RowMatrixXd& xs, RowMatrixXd& scratch, RowMatrixXd& out) const {
    quantize_into(xs, scratch);
    net_.forward_batch_into(scratch, out);
}

}  // namespace qnv
