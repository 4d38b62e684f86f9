#include <doctest.h>

#include "qnv/interval.hpp"
#include "support.hpp"

using namespace qnv;
using namespace qnv::test;

namespace {

bool contains(const std::vector<Interval>& bounds, const VectorXd& y, double rel_tol) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const auto& b = bounds[static_cast<std::size_t>(i)];
        const double tol = rel_tol * std::max({1.0, std::abs(b.lo), std::abs(b.hi)});
        if (y[i] < b.lo - tol || y[i] > b.hi + tol) return false;
    }
    return true;
}

VectorXd sample(std::mt19937_64& rng, const Box& box) {
    VectorXd x(static_cast<Eigen::Index>(box.size()));
    for (std::size_t i = 0; i < box.size(); ++i) x[static_cast<Eigen::Index>(i)] = uniform(rng, box[i].lo, box[i].hi);
    return x;
}

Box random_unit_box(std::mt19937_64& rng, std::size_t n) {
    Box box;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = uniform(rng, -1, 1);
        box.push_back({a, a + uniform(rng, 0, 0.5)});
    }
    return box;
}

}  // namespace

TEST_SUITE("interval_baseline") {

TEST_CASE("identity and single ReLU") {
    const Network id({AffineLayer<double>{RowMatrixXd::Identity(2, 2), VectorXd::Zero(2)}}, Precision::Double);
    CHECK(interval_forward(id, {{0, 1}, {0, 1}}) == std::vector<Interval>{{0, 1}, {0, 1}});

    AffineLayer<double> hidden{RowMatrixXd::Ones(1, 1), VectorXd::Zero(1)};
    AffineLayer<double> out{RowMatrixXd::Ones(1, 1), VectorXd::Zero(1)};
    const Network relu({hidden, out}, Precision::Double);
    CHECK(interval_forward(relu, {{-1, 1}}) == std::vector<Interval>{{0, 1}});
    CHECK_THROWS_AS(interval_forward(relu, {{0, 1}, {0, 1}}), DimensionError);
}

TEST_CASE("sampled containment on random networks") {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 20; ++trial) {
        const auto net = random_network(rng, {4, 12, 12, 5});
        const Box box = random_unit_box(rng, 4);
        const auto bounds = interval_forward(net, box);
        bool ok = true;
        for (int s = 0; s < 10000; ++s) ok = ok && contains(bounds, net.forward(sample(rng, box)), 1e-6);
        CHECK(ok);
    }
}

TEST_CASE("children are tighter than the parent") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const auto net = random_network(rng, {3, 10, 10, 5});
        const Box box = random_unit_box(rng, 3);
        const auto parent = interval_forward(net, box);
        const auto d = static_cast<std::size_t>(rng() % 3);
        Box left = box;
        Box right = box;
        left[d].hi = right[d].lo = (box[d].lo + box[d].hi) / 2;
        for (const auto& child : {interval_forward(net, left), interval_forward(net, right)}) {
            for (std::size_t i = 0; i < child.size(); ++i) {
                const double tol = 1e-9 * std::max(1.0, std::abs(parent[i].hi) + std::abs(parent[i].lo));
                CHECK(child[i].lo >= parent[i].lo - tol);
                CHECK(child[i].hi <= parent[i].hi + tol);
            }
        }
    }
}

TEST_CASE("three-valued predicate evaluation") {
    using P = OutputPredicate;
    const std::vector<Interval> out = {{0, 1}, {2, 3}, {2.5, 4}, {-1, 0}, {-5, -4}};
    CHECK(evaluate_interval(P::argmax_is(Action::SR), out) == Truth::False);
    CHECK(evaluate_interval(P::argmax_is(Action::WR), out) == Truth::Unknown);
    CHECK(evaluate_interval(P::argmax_in({Action::WL, Action::WR}), out) == Truth::Unknown);
    CHECK(evaluate_interval(P::score(Action::COC, Comparison::Le, 1), out) == Truth::True);
    CHECK(evaluate_interval(P::score(Action::COC, Comparison::Ge, 2), out) == Truth::False);
    CHECK(evaluate_interval(P::score_diff(Action::WL, Action::COC, Comparison::Ge, 1), out) == Truth::True);
    CHECK(evaluate_interval(P::negate(P::argmax_is(Action::SR)), out) == Truth::True);
    CHECK(evaluate_interval(P::all_of({P::negate(P::argmax_is(Action::SR)), P::argmax_is(Action::WR)}), out) ==
          Truth::Unknown);
    CHECK(evaluate_interval(P::any_of({P::argmax_is(Action::SR), P::argmax_is(Action::COC)}), out) == Truth::False);

    // Ties: equal point intervals go to the lower index.
    const std::vector<Interval> tie = {{1, 1}, {1, 1}, {0, 0}, {0, 0}, {0, 0}};
    CHECK(evaluate_interval(P::argmax_is(Action::COC), tie) == Truth::True);
    CHECK(evaluate_interval(P::argmax_is(Action::WL), tie) == Truth::False);
}

TEST_CASE("constant network with a unique winner holds after one box") {
    const auto scheme = cas_scheme();
    const auto prop = load_properties_file(data_path("phi9.prop"), scheme).front();
    const auto v = bisect_verify(constant_network(Action::SL), prop);
    CHECK(v.status == VerdictStatus::Holds);
    CHECK(v.boxes_explored == 1);
}

TEST_CASE("violation at the box center yields that witness") {
    const auto scheme = cas_scheme();
    const auto prop = load_properties_file(data_path("phi9.prop"), scheme).front();
    const auto net = constant_network(Action::COC);
    const auto v = bisect_verify(net, prop);
    REQUIRE(v.status == VerdictStatus::Violated);
    REQUIRE(v.witness);
    for (std::size_t i = 0; i < prop.input_box.size(); ++i) {
        const auto& iv = prop.input_box[i];
        CHECK((*v.witness)[static_cast<Eigen::Index>(i)] == iv.lo + (iv.hi - iv.lo) / 2);
    }
    CHECK_FALSE(check_output(prop.output, net.forward(*v.witness)));
    CHECK(bits_equal(v.witness_scores, net.forward(*v.witness)));
}

TEST_CASE("zero budget is unknown") {
    std::mt19937_64 rng(42);
    const auto net = random_network(rng, {2, 8, 5});
    const auto prop = make_property("p", {{-1, 1}, {-1, 1}}, OutputPredicate::argmax_is(Action::WL));
    BisectOptions opts;
    opts.max_boxes = 0;
    const auto v = bisect_verify(net, prop, opts);
    CHECK(v.status == VerdictStatus::Unknown);
    CHECK(v.boxes_explored == 0);
}

TEST_CASE("a proof by bisection carries over to enumeration") {
    std::mt19937_64 rng(43);
    int proved = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto scheme = random_scheme(rng, 2, 400);
        const auto net = random_network(rng, {2, 6, 5});
        const auto prop = make_property("p", random_box(rng, scheme), random_predicate(rng, 1));
        BisectOptions opts;
        opts.max_boxes = 2000;
        const auto iv = bisect_verify(net, prop, opts);
        if (iv.status == VerdictStatus::Violated) {
            CHECK_FALSE(check_output(prop.output, net.forward(*iv.witness)));
        }
        if (iv.status != VerdictStatus::Holds) continue;
        ++proved;
        CHECK(verify(net, scheme, prop).status == VerdictStatus::Holds);
        auto inner = prop;
        for (auto& b : inner.input_box) {
            const double w = b.hi - b.lo;
            b.lo += 0.25 * w;
            b.hi -= 0.25 * w;
        }
        CHECK(verify(net, scheme, inner).status == VerdictStatus::Holds);
    }
    CHECK(proved > 10);
}

TEST_CASE("float evaluation can escape double-precision bounds") {
    // 0.1f * 3 rounds up in float to 0.30000001192..., while the analysis
    // computes 0.30000000447... from the same stored weight.
    AffineLayer<double> l{RowMatrixXd::Constant(1, 1, 0.1), VectorXd::Zero(1)};
    const Network net({l}, Precision::Single);
    const auto bounds = interval_forward(net, {{3, 3}});
    const double y = net.forward(VectorXd::Constant(1, 3.0))[0];
    CHECK(y > bounds[0].hi);
    CHECK_FALSE(contains(bounds, VectorXd::Constant(1, y), 0.0));
}

TEST_CASE("fuzz: point boxes on single-precision networks") {
    std::mt19937_64 rng(44);
    int escapes = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto net = random_network(rng, {3, 8, 5}, Precision::Single);
        const VectorXd x = sample(rng, {{-1, 1}, {-1, 1}, {-1, 1}});
        Box point;
        for (const double v : x) point.push_back({v, v});
        if (!contains(interval_forward(net, point), net.forward(x), 0.0)) ++escapes;
    }
    MESSAGE("single-precision outputs outside double bounds: " << escapes << " of 500");
    CHECK(escapes > 0);
}

}  // TEST_SUITE
