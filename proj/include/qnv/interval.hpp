#pragma once

#include <optional>
#include <vector>

#include "qnv/enum_verifier.hpp"
#include "qnv/network.hpp"
#include "qnv/property.hpp"

namespace qnv {

/// Output bounds of `net` over `box` by layer-wise interval arithmetic.
///
/// Runs at double precision with round-to-nearest, like most analysis-based
/// verifiers. The bounds therefore describe the real-valued network and can
/// miss a concrete float evaluation by a few ulps.
std::vector<Interval> interval_forward(const Network& net, const Box& box);

enum class Truth : std::uint8_t { False, True, Unknown };

/// Three-valued evaluation of `pred` for every score vector inside `outputs`.
Truth evaluate_interval(const OutputPredicate& pred, const std::vector<Interval>& outputs);

struct IntervalVerdict {
    std::string property;
    VerdictStatus status = VerdictStatus::Unknown;
    std::optional<VectorXd> witness;  // set iff Violated
    VectorXd witness_scores;
    std::uint64_t boxes_explored = 0;
    bool max_depth_reached = false;
    double wall_time = 0.0;
};

struct BisectOptions {
    std::uint64_t max_boxes = 100000;
    unsigned max_depth = 64;
};

/// Input-splitting verifier over the continuous box of `prop`.
///
/// Boxes are taken first-in first-out. A box is discharged when its output
/// intervals prove the predicate; otherwise its center is evaluated
/// concretely and a failing center ends the search as Violated. Remaining
/// boxes are split in half along the dimension that is widest relative to
/// the original box. Running out of budget or depth yields Unknown.
IntervalVerdict bisect_verify(const Network& net, const Property& prop, const BisectOptions& opts = {});

}  // namespace qnv
