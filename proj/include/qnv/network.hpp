#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnv/common.hpp"

namespace qnv {

/// y = W x + b with W stored out x in, row-major.
template <typename Scalar>
struct AffineLayer {
    RowMatrix<Scalar> weights;
    Vector<Scalar> biases;

    Eigen::Index in_dim() const { return weights.cols(); }
    Eigen::Index out_dim() const { return weights.rows(); }

    template <typename Other>
    AffineLayer<Other> cast() const {
        return {weights.template cast<Other>(), biases.template cast<Other>()};
    }

    bool operator==(const AffineLayer& o) const { return same_values(weights, o.weights) && same_values(biases, o.biases); }
};

/// Per-dimension affine input map x' = (x - mean) / range applied before the
/// first layer. Empty vectors mean identity.
struct Normalization {
    VectorXd means;
    VectorXd ranges;

    static Normalization identity(Eigen::Index n);
    bool operator==(const Normalization& o) const { return same_values(means, o.means) && same_values(ranges, o.ranges); }
};

struct NetworkMetadata {
    std::string name;
    double tau = 0.0;
    std::optional<Action> alpha_prev;

    bool operator==(const NetworkMetadata&) const = default;
};

/// Feed-forward ReLU network: ReLU after every layer except the last.
///
/// Parameters are stored once at double precision and, for Single networks,
/// rounded to float at construction so that the stored doubles are exactly
/// the values the float kernel uses. Evaluation accumulates every neuron's
/// dot product in ascending input index, then adds the bias, at the declared
/// precision. The build disables floating-point contraction, so the result
/// is a pure function of the parameters and input bits.
class Network {
public:
    Network(std::vector<AffineLayer<double>> layers, Precision precision = Precision::Single,
            Normalization normalization = {}, NetworkMetadata metadata = {});

    Eigen::Index input_dim() const { return layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.back().out_dim(); }
    std::size_t num_layers() const { return layers_.size(); }
    std::vector<Eigen::Index> widths() const;

    const std::vector<AffineLayer<double>>& layers() const { return layers_; }
    Precision precision() const { return precision_; }
    const Normalization& normalization() const { return normalization_; }
    const NetworkMetadata& metadata() const { return metadata_; }

    VectorXd forward(const VectorXd& x) const;

    /// Rows of `xs` are inputs; row i of the result is bit-identical to
    /// forward(xs.row(i)).
    RowMatrixXd forward_batch(const RowMatrixXd& xs) const;

    /// Same as forward_batch, writing into a preallocated k x m matrix.
    void forward_batch_into(const RowMatrixXd& xs, RowMatrixXd& out) const;

    /// Pre-activation values of every layer for one input, at double
    /// precision regardless of the declared precision.
    std::vector<VectorXd> pre_activations(const VectorXd& x) const;

    bool operator==(const Network& other) const;

private:
    template <typename Scalar>
    void run_batch(const std::vector<AffineLayer<Scalar>>& layers, const RowMatrixXd& xs,
                   RowMatrixXd& out) const;

    std::vector<AffineLayer<double>> layers_;
    std::vector<AffineLayer<float>> single_layers_;
    Precision precision_;
    Normalization normalization_;
    NetworkMetadata metadata_;
};

/// Builds a layer stack of the given widths with every parameter zero.
std::vector<AffineLayer<double>> zero_layers(std::span<const Eigen::Index> widths);

Network load_network(std::istream& in);
Network load_network_file(const std::string& path);
void save_network(const Network& net, std::ostream& out);
void save_network_file(const Network& net, const std::string& path);

}  // namespace qnv
