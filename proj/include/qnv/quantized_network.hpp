#pragma once

#include <vector>

#include "qnv/network.hpp"
#include "qnv/quantizer.hpp"

namespace qnv {

/// f^q = f o q: quantizes every input row onto the scheme's grid, then runs
/// the network. Explicit axes go through a dense lookup table when their
/// values admit one.
class QuantizedNetwork {
public:
    QuantizedNetwork(Network net, QuantScheme scheme);

    const Network& network() const { return net_; }
    const QuantScheme& scheme() const { return scheme_; }
    const std::vector<DenseLUT>& luts() const { return luts_; }

    /// Writes q(xs) into `out` (resized to match).
    void quantize_into(const RowMatrixXd& xs, RowMatrixXd& out) const;

    VectorXd forward(const VectorXd& x) const;
    RowMatrixXd forward_batch(const RowMatrixXd& xs) const;
    /// `scratch` holds the quantized rows and is reused across calls.
    void forward_batch_into(const RowMatrixXd& xs, RowMatrixXd& scratch, RowMatrixXd& out) const;

private:
    Network net_;
    QuantScheme scheme_;
    std::vector<DenseLUT> luts_;
};

}  // namespace qnv
