#include <doctest.h>

#include <numbers>

#include "qnv/trainer.hpp"
#include "support.hpp"

using namespace qnv;
using namespace qnv::test;

namespace {

// Two grid points, five scores each.
LookupTable two_entry_table() {
    QuantScheme scheme({AxisQuant::explicit_values("a", "u", {0, 1}), AxisQuant::explicit_values("b", "u", {0}),
                        AxisQuant::explicit_values("c", "u", {0}), AxisQuant::explicit_values("d", "u", {0}),
                        AxisQuant::explicit_values("e", "u", {0})});
    RowMatrixXd scores(2, 5);
    scores << 0.1, -0.3, -0.2, -0.9, -1.0,  //
        -0.5, -0.1, 0.2, 0.3, -0.4;
    return {std::move(scheme), scores, 5.0, Action::WR};
}

QuantScheme coarse_cas() {
    constexpr double pi = std::numbers::pi;
    return QuantScheme({AxisQuant::explicit_values("rho", "m", {0, 1000, 5300, 21400, 56000}),
                        AxisQuant::uniform("theta", "rad", 2 * pi / 10, -pi, -pi, pi),
                        AxisQuant::uniform("psi", "rad", 2 * pi / 10, -pi, -pi, pi),
                        AxisQuant::uniform("v_own", "m/s", 50, 0, 50, 200),
                        AxisQuant::uniform("v_int", "m/s", 50, 0, 50, 200)});
}

double loss_of(const std::vector<AffineLayer<double>>& layers, const RowMatrixXd& x, const RowMatrixXd& t, double lambda) {
    return loss_and_grad(layers, x, t, lambda).loss;
}

// Smallest |pre-activation| and top-two output margin over the batch.
std::pair<double, double> kink_distance(const std::vector<AffineLayer<double>>& layers, const RowMatrixXd& x) {
    const Network net(layers, Precision::Double);
    double nearest = std::numeric_limits<double>::infinity();
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const auto pre = net.pre_activations(x.row(r).transpose());
        for (std::size_t l = 0; l + 1 < pre.size(); ++l) nearest = std::min(nearest, pre[l].cwiseAbs().minCoeff());
        VectorXd y = pre.back();
        std::sort(y.begin(), y.end());
        margin = std::min(margin, y[y.size() - 1] - y[y.size() - 2]);
    }
    return {nearest, margin};
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.shape = {5, 10, 4};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.asym_weight = 0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("two-entry table is fitted") {
    const auto table = two_entry_table();
    TrainConfig cfg;
    cfg.shape = {5, 16, 5};
    cfg.epochs = 2000;
    cfg.batch_size = 2;
    cfg.learning_rate = 0.05;
    cfg.seed = 3;
    cfg.precision = Precision::Double;
    const auto net = train(table, cfg);
    const auto pred = net.forward_batch(RowMatrixXd(index_to_point(table.scheme, 0).transpose()));
    double mse = 0;
    for (std::uint64_t i = 0; i < 2; ++i) {
        const VectorXd y = net.forward(index_to_point(table.scheme, i));
        mse += (y - table.scores.row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm() / 10.0;
    }
    CHECK(mse < 1e-4);
    CHECK(pred.rows() == 1);
}

TEST_CASE("zero epochs returns the seeded initial network") {
    const auto table = two_entry_table();
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    const auto net = train(table, cfg);
    CHECK(net == initial_network(table, cfg));
    cfg.seed = 10;
    CHECK_FALSE(net == initial_network(table, cfg));
    // Glorot-uniform limits.
    for (const auto& layer : net.layers()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
        CHECK(layer.weights.cwiseAbs().maxCoeff() <= limit);
        CHECK(layer.biases.isZero());
    }
}

TEST_CASE("same seed, same network") {
    const auto table = generate_synthetic_table(coarse_cas());
    TrainConfig cfg;
    cfg.shape = {5, 20, 20, 5};
    cfg.epochs = 2;
    cfg.seed = 4;
    const auto a = train(table, cfg);
    const auto b = train(table, cfg);
    CHECK(a == b);
    std::ostringstream sa;
    std::ostringstream sb;
    save_network(a, sa);
    save_network(b, sb);
    CHECK(sa.str() == sb.str());
}

TEST_CASE("training lowers the table loss") {
    const auto table = generate_synthetic_table(coarse_cas());
    TrainConfig cfg;
    cfg.shape = {5, 20, 20, 5};
    cfg.epochs = 3;
    TrainReport report;
    const auto net = train(table, cfg, &report);
    CHECK(report.epoch_loss.size() == 3);
    CHECK(report.final_loss < report.initial_loss);
    CHECK(report.final_loss == table_loss(net, table, cfg.asym_weight));
    CHECK(net.precision() == Precision::Single);
    for (const auto& layer : net.layers()) {
        CHECK(layer.weights == layer.weights.cast<float>().cast<double>());
    }
    CHECK(net.metadata().tau == table.tau);
    CHECK(net.metadata().alpha_prev == table.alpha_prev);
}

TEST_CASE("divergence names the epoch") {
    const auto table = generate_synthetic_table(coarse_cas());
    TrainConfig cfg;
    cfg.shape = {5, 20, 5};
    cfg.epochs = 5;
    cfg.learning_rate = 1e6;
    try {
        train(table, cfg);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(std::string(e.what()).find("epoch " + std::to_string(e.epoch())) != std::string::npos);
    }
}

TEST_CASE("zero-error batch") {
    std::mt19937_64 rng(60);
    const auto layers = random_layers(rng, {5, 7, 5});
    RowMatrixXd x(4, 5);
    for (auto& v : x.reshaped()) v = uniform(rng, -1, 1);
    const RowMatrixXd t = Network(layers, Precision::Double).forward_batch(x);
    const auto lg = loss_and_grad(layers, x, t, 4.0);
    // Targets come from the ordered kernel, the loss from a GEMM: equal up
    // to summation order.
    CHECK(lg.loss < 1e-28);
    CHECK(lg.grads.back().biases.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("one hidden neuron by hand") {
    AffineLayer<double> l1{RowMatrixXd::Constant(1, 1, 0.7), VectorXd::Constant(1, 0.2)};
    AffineLayer<double> l2{RowMatrixXd::Constant(1, 1, -1.3), VectorXd::Constant(1, 0.4)};
    const RowMatrixXd x = RowMatrixXd::Constant(1, 1, 1.5);
    const RowMatrixXd t = RowMatrixXd::Constant(1, 1, 0.25);
    const double z1 = 0.7 * 1.5 + 0.2;
    const double y = -1.3 * z1 + 0.4;
    const double g = 2 * (y - 0.25);
    const auto lg = loss_and_grad(std::vector{l1, l2}, x, t, 4.0);
    CHECK(lg.loss == doctest::Approx((y - 0.25) * (y - 0.25)).epsilon(1e-14));
    CHECK(lg.grads[1].weights(0, 0) == doctest::Approx(g * z1).epsilon(1e-14));
    CHECK(lg.grads[1].biases[0] == doctest::Approx(g).epsilon(1e-14));
    CHECK(lg.grads[0].weights(0, 0) == doctest::Approx(g * -1.3 * 1.5).epsilon(1e-14));
    CHECK(lg.grads[0].biases[0] == doctest::Approx(g * -1.3).epsilon(1e-14));
}

TEST_CASE("mismatched advisory is weighted") {
    AffineLayer<double> layer{RowMatrixXd::Zero(5, 5), VectorXd::Zero(5)};
    layer.biases << 1, 0, 0, 0, 0;  // predicts COC
    RowMatrixXd t(1, 5);
    t << 0, 1, -1, -1, -1;  // table says WL; squared error 5
    const RowMatrixXd x = RowMatrixXd::Zero(1, 5);
    const double l1 = loss_and_grad(std::vector{layer}, x, t, 1.0).loss;
    const double l10 = loss_and_grad(std::vector{layer}, x, t, 10.0).loss;
    CHECK(l1 == 1.0);
    CHECK(l10 == 10.0 * l1);
    // Agreement is never weighted.
    RowMatrixXd agree(1, 5);
    agree << 2, 1, -1, -1, -1;
    CHECK(loss_and_grad(std::vector{layer}, x, agree, 10.0).loss == loss_and_grad(std::vector{layer}, x, agree, 1.0).loss);
}

TEST_CASE("gradients match central differences") {
    std::mt19937_64 rng(61);
    int checked = 0;
    double worst = 0;
    for (int trial = 0; trial < 60 && checked < 20; ++trial) {
        auto layers = random_layers(rng, {5, 6, 6, 5});
        RowMatrixXd x(3, 5);
        RowMatrixXd t(3, 5);
        for (auto& v : x.reshaped()) v = uniform(rng, -1, 1);
        for (auto& v : t.reshaped()) v = uniform(rng, -1, 1);
        // Stay away from ReLU kinks and argmax switches.
        const auto [nearest, margin] = kink_distance(layers, x);
        if (nearest < 1e-3 || margin < 1e-3) continue;
        ++checked;
        const auto lg = loss_and_grad(layers, x, t, 4.0);
        const double h = 1e-6;
        auto check = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double up = loss_of(layers, x, t, 4.0);
            param = saved - h;
            const double down = loss_of(layers, x, t, 4.0);
            param = saved;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
            worst = std::max(worst, rel);
        };
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (Eigen::Index i = 0; i < layers[l].weights.size(); ++i) {
                check(layers[l].weights.data()[i], lg.grads[l].weights.data()[i]);
            }
            for (Eigen::Index i = 0; i < layers[l].biases.size(); ++i) {
                check(layers[l].biases[i], lg.grads[l].biases[i]);
            }
        }
    }
    CHECK(checked >= 20);
    CHECK(worst < 1e-4);
}

TEST_CASE("network overload applies the normalization") {
    std::mt19937_64 rng(62);
    Normalization norm{VectorXd::Constant(5, 3.0), VectorXd::Constant(5, 2.0)};
    const Network net(random_layers(rng, {5, 6, 5}), Precision::Double, norm);
    Batch batch{RowMatrixXd(2, 5), RowMatrixXd(2, 5)};
    for (auto& v : batch.inputs.reshaped()) v = uniform(rng, 0, 6);
    for (auto& v : batch.targets.reshaped()) v = uniform(rng, -1, 1);
    const RowMatrixXd normalized = (batch.inputs.array() - 3.0) / 2.0;
    const auto a = loss_and_grad(net, batch, 4.0);
    const auto b = loss_and_grad(net.layers(), normalized, batch.targets, 4.0);
    CHECK(a.loss == b.loss);
    CHECK_THROWS(loss_and_grad(net, Batch{RowMatrixXd(0, 5), RowMatrixXd(0, 5)}, 4.0));
}

}  // TEST_SUITE
