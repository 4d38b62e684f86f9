#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qnv/detail/ordered_parallel.hpp"
#include "qnv/network.hpp"
#include "qnv/property.hpp"
#include "qnv/quantizer.hpp"

namespace qnv {

enum class VerdictStatus : std::uint8_t { Holds, Violated, Unknown };

std::string_view status_name(VerdictStatus s);

struct Counterexample {
    GridIndex index;
    VectorXd point;
    VectorXd scores;

    bool operator==(const Counterexample& o) const {
        return index == o.index && same_values(point, o.point) && same_values(scores, o.scores);
    }
};

struct Verdict {
    std::string property;
    VerdictStatus status = VerdictStatus::Holds;
    std::vector<Counterexample> counterexamples;  // ascending flat index, capped
    std::uint64_t states_checked = 0;
    std::uint64_t violations = 0;  // uncapped count
    double wall_time = 0.0;        // seconds
};

/// Same outcome: status, counts and counterexamples; timing is ignored.
bool same_outcome(const Verdict& a, const Verdict& b);

/// Instrumentation hook for tests and benchmarks.
struct EvalCounter {
    std::atomic<std::uint64_t> rows{0};         // network rows evaluated
    std::atomic<std::uint64_t> batches{0};      // forward_batch calls
    std::atomic<std::uint64_t> grid_passes{0};  // full-grid sweeps started
};

struct EnumOptions {
    std::size_t chunk = 4096;  // rows per forward_batch call
    unsigned jobs = 1;
    std::size_t max_counterexamples = 1000;
    EvalCounter* counter = nullptr;
};

/// Checks `prop` on every quantized state its box selects. The outcome does
/// not depend on `chunk` or `jobs`: work is split into contiguous index
/// ranges and merged in range order.
Verdict verify(const Network& net, const QuantScheme& scheme, const Property& prop, const EnumOptions& opts = {});

/// Scores for every grid point, row i for flat index i.
RowMatrixXd full_grid_eval(const Network& net, const QuantScheme& scheme, const EnumOptions& opts = {},
                           std::size_t max_bytes = std::size_t{1} << 30);

using RowConsumer = std::function<void(std::uint64_t first_flat, const RowMatrixXd& points, const RowMatrixXd& scores)>;

/// Streams the full grid to `consumer` in ascending flat order, one chunk at
/// a time; memory use is bounded by the chunk size and job count.
void full_grid_stream(const Network& net, const QuantScheme& scheme, const EnumOptions& opts,
                      const RowConsumer& consumer);

/// All properties from one full-grid pass. Each verdict matches what
/// verify() returns for that property alone.
std::map<std::string, Verdict> verify_all(const Network& net, const QuantScheme& scheme,
                                          const std::vector<Property>& props, const EnumOptions& opts = {});

}  // namespace qnv
