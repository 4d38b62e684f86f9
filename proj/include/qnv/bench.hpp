#pragma once

#include <cstdint>

#include "qnv/network.hpp"
#include "qnv/quantizer.hpp"

namespace qnv {

/// `count` points drawn uniformly from each axis's [front, back] range.
RowMatrixXd random_points(const QuantScheme& scheme, std::size_t count, std::uint64_t seed);

struct OverheadResult {
    std::size_t points = 0;
    unsigned repeats = 0;
    double forward_s = 0.0;    // best of `repeats`, forward only
    double quantized_s = 0.0;  // best of `repeats`, quantize then forward
    double overhead() const { return quantized_s / forward_s - 1.0; }
};

/// Throughput of f against f o q on one batch of random points. The two
/// passes are interleaved and the fastest repeat of each is kept.
OverheadResult bench_overhead(const Network& net, const QuantScheme& scheme, std::size_t points = 1'000'000,
                              std::uint64_t seed = 0, unsigned repeats = 3);

}  // namespace qnv
