#include "qnv/bench.hpp"

#include <chrono>
#include <limits>

#include "qnv/quantized_network.hpp"

namespace qnv {

RowMatrixXd random_points(const QuantScheme& scheme, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RowMatrixXd xs(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(scheme.dims()));
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
        for (Eigen::Index c = 0; c < xs.cols(); ++c) {
            const auto& axis = scheme.axis(static_cast<std::size_t>(c));
            xs(r, c) = axis.front() + unit_uniform(rng) * (axis.back() - axis.front());
        }
    }
    return xs;
}

OverheadResult bench_overhead(const Network& net, const QuantScheme& scheme, std::size_t points, std::uint64_t seed,
                              unsigned repeats) {
    if (points == 0 || repeats == 0) throw std::invalid_argument("points and repeats must be positive");
    const QuantizedNetwork qnet(net, scheme);
    const RowMatrixXd xs = random_points(scheme, points, seed);
    RowMatrixXd scratch;
    RowMatrixXd out;
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

    OverheadResult res{points, repeats, std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()};
    net.forward_batch_into(xs, out);  // warm-up, sizes the buffers
    qnet.forward_batch_into(xs, scratch, out);
    for (unsigned k = 0; k < repeats; ++k) {
        auto t0 = clock::now();
        net.forward_batch_into(xs, out);
        auto t1 = clock::now();
        qnet.forward_batch_into(xs, scratch, out);
        auto t2 = clock::now();
        res.forward_s = std::min(res.forward_s, seconds(t0, t1));
        res.quantized_s = std::min(res.quantized_s, seconds(t1, t2));
    }
    return res;
}

}  // namespace qnv
