#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qnv/network.hpp"
#include "qnv/table.hpp"

namespace qnv {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 256;
    double learning_rate = 0.05;
    double asym_weight = 4.0;  // loss multiplier for rows whose advisory disagrees
    std::uint64_t seed = 0;
    std::vector<Eigen::Index> shape = {5, 50, 50, 50, 50, 50, 5};
    Precision precision = Precision::Single;

    /// Throws std::invalid_argument describing the first bad field.
    void validate() const;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t epoch, double loss);
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

struct Batch {
    RowMatrixXd inputs;   // raw network inputs, k x n
    RowMatrixXd targets;  // k x m
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<AffineLayer<double>> grads;  // same shapes as the layers
};

/// Mean over the batch of w_i * ||y_i - t_i||^2 / m, where w_i is
/// `asym_weight` when argmax y_i != argmax t_i and 1 otherwise, with its
/// gradient by backpropagation. The weight is piecewise constant and does
/// not contribute to the gradient. Inputs are already normalized.
LossAndGrad loss_and_grad(std::span<const AffineLayer<double>> layers, const RowMatrixXd& inputs,
                          const RowMatrixXd& targets, double asym_weight);

/// Same, taking raw inputs and applying the network's normalization.
LossAndGrad loss_and_grad(const Network& net, const Batch& batch, double asym_weight);

struct TrainReport {
    double initial_loss = 0.0;  // full-table loss before the first step
    double final_loss = 0.0;    // full-table loss of the returned network
    std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

/// Plain minibatch SGD at double precision. The returned network carries
/// the table's metadata and a normalization mapping each axis onto [-1, 1],
/// and is rounded once to `cfg.precision`. Same table and config give a
/// bit-identical network.
Network train(const LookupTable& table, const TrainConfig& cfg, TrainReport* report = nullptr);

/// The seeded initial network train() starts from.
Network initial_network(const LookupTable& table, const TrainConfig& cfg);

/// Asymmetric loss of `net` over the whole table.
double table_loss(const Network& net, const LookupTable& table, double asym_weight);

}  // namespace qnv
