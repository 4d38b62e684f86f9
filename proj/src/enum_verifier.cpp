#include "qnv/enum_verifier.hpp"

#include <chrono>

namespace qnv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Keep enough rows in flight per wave to amortise thread start-up.
std::uint64_t window_for(const EnumOptions& opts) {
    const std::uint64_t chunk = std::max<std::size_t>(opts.chunk, 1);
    return std::max<std::uint64_t>(std::uint64_t{opts.jobs} * 4, (std::uint64_t{1} << 16) / chunk + 1);
}

void check_compatible(const Network& net, const QuantScheme& scheme) {
    if (static_cast<std::size_t>(net.input_dim()) != scheme.dims()) {
        throw DimensionError("network takes " + std::to_string(net.input_dim()) + " inputs, scheme has " +
                             std::to_string(scheme.dims()) + " axes");
    }
}

void check_property(const Network& net, const QuantScheme& scheme, const Property& prop) {
    if (prop.input_box.size() != scheme.dims()) {
        throw DimensionError("property '" + prop.name + "' constrains " + std::to_string(prop.input_box.size()) +
                             " dimensions, scheme has " + std::to_string(scheme.dims()));
    }
    if (!prop.network_id.empty() && prop.network_id != net.metadata().name) {
        throw std::invalid_argument("property '" + prop.name + "' references unknown network '" + prop.network_id +
                                    "' (loaded network is '" + net.metadata().name + "')");
    }
}

struct ChunkViolations {
    std::uint64_t count = 0;
    std::vector<Counterexample> kept;
};

void count_eval(const EnumOptions& opts, std::uint64_t rows) {
    if (opts.counter) {
        opts.counter->rows += rows;
        opts.counter->batches += 1;
    }
}

}  // namespace

std::string_view status_name(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::Holds: return "holds";
        case VerdictStatus::Violated: return "violated";
        case VerdictStatus::Unknown: return "unknown";
    }
    return "unknown";
}

bool same_outcome(const Verdict& a, const Verdict& b) {
    return a.property == b.property && a.status == b.status && a.states_checked == b.states_checked &&
           a.violations == b.violations && a.counterexamples == b.counterexamples;
}

Verdict verify(const Network& net, const QuantScheme& scheme, const Property& prop, const EnumOptions& opts) {
    const auto start = Clock::now();
    check_compatible(net, scheme);
    check_property(net, scheme, prop);

    const StateSet states = states_for_property(scheme, prop.input_box, prop.mode, prop.slack);
    const std::uint64_t chunk = std::max<std::size_t>(opts.chunk, 1);
    const std::uint64_t num_chunks = (states.size() + chunk - 1) / chunk;
    const auto n = static_cast<Eigen::Index>(scheme.dims());

    Verdict verdict;
    verdict.property = prop.name;
    verdict.states_checked = states.size();

    detail::ordered_parallel<ChunkViolations>(
        num_chunks, opts.jobs, window_for(opts),
        [&](std::uint64_t c) {
            const std::uint64_t first = c * chunk;
            const std::uint64_t rows = std::min(chunk, states.size() - first);
            RowMatrixXd points(static_cast<Eigen::Index>(rows), n);
            std::vector<GridIndex> indices;
            indices.reserve(static_cast<std::size_t>(rows));
            for (std::uint64_t r = 0; r < rows; ++r) {
                indices.push_back(states.at(first + r));
                points.row(static_cast<Eigen::Index>(r)) = index_to_point(scheme, indices.back()).transpose();
            }
            RowMatrixXd scores = net.forward_batch(points);
            count_eval(opts, rows);
            ChunkViolations out;
            for (std::uint64_t r = 0; r < rows; ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                VectorXd s = scores.row(ri).transpose();
                if (check_output(prop.output, s)) continue;
                ++out.count;
                if (out.kept.size() < opts.max_counterexamples) {
                    out.kept.push_back({std::move(indices[r]), points.row(ri).transpose(), std::move(s)});
                }
            }
            return out;
        },
        [&](std::uint64_t, ChunkViolations&& part) {
            verdict.violations += part.count;
            for (auto& cex : part.kept) {
                if (verdict.counterexamples.size() >= opts.max_counterexamples) break;
                verdict.counterexamples.push_back(std::move(cex));
            }
        });

    verdict.status = verdict.violations > 0 ? VerdictStatus::Violated : VerdictStatus::Holds;
    verdict.wall_time = seconds_since(start);
    return verdict;
}

void full_grid_stream(const Network& net, const QuantScheme& scheme, const EnumOptions& opts,
                      const RowConsumer& consumer) {
    check_compatible(net, scheme);
    const std::uint64_t total = scheme.grid_size();
    const std::uint64_t chunk = std::max<std::size_t>(opts.chunk, 1);
    const std::uint64_t num_chunks = (total + chunk - 1) / chunk;
    const auto n = static_cast<Eigen::Index>(scheme.dims());
    if (opts.counter) opts.counter->grid_passes += 1;

    struct Block {
        RowMatrixXd points;
        RowMatrixXd scores;
    };
    detail::ordered_parallel<Block>(
        num_chunks, opts.jobs, window_for(opts),
        [&](std::uint64_t c) {
            const std::uint64_t first = c * chunk;
            const auto rows = static_cast<Eigen::Index>(std::min(chunk, total - first));
            Block b{RowMatrixXd(rows, n), RowMatrixXd()};
            fill_grid_points(scheme, first, b.points);
            net.forward_batch_into(b.points, b.scores);
            count_eval(opts, static_cast<std::uint64_t>(rows));
            return b;
        },
        [&](std::uint64_t c, Block&& b) { consumer(c * chunk, b.points, b.scores); });
}

RowMatrixXd full_grid_eval(const Network& net, const QuantScheme& scheme, const EnumOptions& opts,
                           std::size_t max_bytes) {
    check_compatible(net, scheme);
    const std::uint64_t total = scheme.grid_size();
    const auto m = static_cast<std::uint64_t>(net.output_dim());
    if (total > max_bytes / (m * sizeof(double))) {
        throw std::length_error("full grid of " + std::to_string(total) + " rows exceeds the memory bound of " +
                                std::to_string(max_bytes) + " bytes; use full_grid_stream");
    }
    RowMatrixXd out(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(m));
    full_grid_stream(net, scheme, opts, [&](std::uint64_t first, const RowMatrixXd&, const RowMatrixXd& scores) {
        out.middleRows(static_cast<Eigen::Index>(first), scores.rows()) = scores;
    });
    return out;
}

std::map<std::string, Verdict> verify_all(const Network& net, const QuantScheme& scheme,
                                          const std::vector<Property>& props, const EnumOptions& opts) {
    const auto start = Clock::now();
    check_compatible(net, scheme);
    std::map<std::string, Verdict> out;
    if (props.empty()) return out;

    std::vector<StateSet> sets;
    for (const auto& prop : props) {
        check_property(net, scheme, prop);
        if (out.contains(prop.name)) throw std::invalid_argument("duplicate property name '" + prop.name + "'");
        sets.push_back(states_for_property(scheme, prop.input_box, prop.mode, prop.slack));
        Verdict v;
        v.property = prop.name;
        v.states_checked = sets.back().size();
        out.emplace(prop.name, std::move(v));
    }

    full_grid_stream(net, scheme, opts, [&](std::uint64_t first, const RowMatrixXd& points, const RowMatrixXd& scores) {
        for (std::size_t p = 0; p < props.size(); ++p) {
            Verdict& v = out.at(props[p].name);
            for (Eigen::Index r = 0; r < scores.rows(); ++r) {
                const std::uint64_t flat = first + static_cast<std::uint64_t>(r);
                if (!sets[p].contains_flat(flat)) continue;
                VectorXd s = scores.row(r).transpose();
                if (check_output(props[p].output, s)) continue;
                ++v.violations;
                if (v.counterexamples.size() < opts.max_counterexamples) {
                    v.counterexamples.push_back({unflatten(scheme, flat), points.row(r).transpose(), std::move(s)});
                }
            }
        }
    });

    const double elapsed = seconds_since(start);
    for (auto& [name, v] : out) {
        v.status = v.violations > 0 ? VerdictStatus::Violated : VerdictStatus::Holds;
        v.wall_time = elapsed;
    }
    return out;
}

}  // namespace qnv
