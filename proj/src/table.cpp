#include "qnv/table.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

#include "text_io.hpp"

namespace qnv {

VectorXd synthetic_scores(const VectorXd& state) {
    if (state.size() != 5) throw DimensionError("synthetic scores take (rho, theta, psi, v_own, v_int)");
    constexpr double pi = std::numbers::pi;
    static constexpr std::array<double, kNumActions> kTurn = {0.0, 0.35, -0.35, 1.05, -1.05};
    const double rho = state[0];
    const double theta = state[1];
    const double psi = state[2];
    const double v_own = state[3];
    const double v_int = state[4];

    const double theta_rel = std::remainder(theta + psi / 2.0, 2.0 * pi);
    const double base = std::exp(-rho / 20000.0) * (1.0 + (v_int - v_own) / 400.0);
    VectorXd scores(static_cast<Eigen::Index>(kNumActions));
    for (std::size_t a = 0; a < kNumActions; ++a) {
        double s = -std::abs(theta_rel - kTurn[a]) * base;
        if (a == static_cast<std::size_t>(Action::COC)) s += 0.1 * (1.0 - base);
        scores[static_cast<Eigen::Index>(a)] = s;
    }
    return scores;
}

LookupTable generate_synthetic_table(const QuantScheme& scheme, double tau, Action alpha_prev) {
    static constexpr std::array<std::string_view, 5> kAxes = {"rho", "theta", "psi", "v_own", "v_int"};
    if (scheme.dims() != kAxes.size()) throw DimensionError("synthetic table needs a five-axis scheme");
    std::array<std::size_t, 5> where{};
    for (std::size_t k = 0; k < kAxes.size(); ++k) {
        const auto i = scheme.find_axis(kAxes[k]);
        if (!i) throw std::invalid_argument("synthetic table needs an axis named '" + std::string(kAxes[k]) + "'");
        where[k] = *i;
    }
    LookupTable table{scheme, RowMatrixXd(static_cast<Eigen::Index>(scheme.grid_size()), 5), tau, alpha_prev};
    constexpr Eigen::Index kBlock = 4096;
    RowMatrixXd points;
    VectorXd state(5);
    for (std::uint64_t first = 0; first < scheme.grid_size(); first += kBlock) {
        const auto rows = static_cast<Eigen::Index>(std::min<std::uint64_t>(kBlock, scheme.grid_size() - first));
        points.resize(rows, static_cast<Eigen::Index>(scheme.dims()));
        fill_grid_points(scheme, first, points);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (std::size_t k = 0; k < 5; ++k) state[static_cast<Eigen::Index>(k)] = points(r, static_cast<Eigen::Index>(where[k]));
            table.scores.row(static_cast<Eigen::Index>(first) + r) = synthetic_scores(state).transpose();
        }
    }
    return table;
}

namespace {

void check_shape(const RowMatrixXd& predicted, const LookupTable& table) {
    if (predicted.rows() != table.scores.rows() || predicted.cols() != table.scores.cols()) {
        throw DimensionError("prediction shape " + std::to_string(predicted.rows()) + "x" +
                             std::to_string(predicted.cols()) + " does not match table shape " +
                             std::to_string(table.scores.rows()) + "x" + std::to_string(table.scores.cols()));
    }
}

}  // namespace

double policy_accuracy(const RowMatrixXd& predicted, const LookupTable& table) {
    check_shape(predicted, table);
    if (predicted.rows() == 0) return 1.0;
    std::uint64_t agree = 0;
    for (Eigen::Index r = 0; r < predicted.rows(); ++r) {
        if (argmax(predicted.row(r)) == argmax(table.scores.row(r))) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(predicted.rows());
}

double score_error(const RowMatrixXd& predicted, const LookupTable& table, ScoreNorm norm) {
    check_shape(predicted, table);
    if (predicted.rows() == 0) return 0.0;
    std::vector<double> per_row(static_cast<std::size_t>(predicted.rows()));
    for (Eigen::Index r = 0; r < predicted.rows(); ++r) {
        const auto diff = (predicted.row(r) - table.scores.row(r)).array();
        per_row[static_cast<std::size_t>(r)] =
            norm == ScoreNorm::L1 ? diff.abs().sum() : std::sqrt(diff.square().sum());
    }
    return pairwise_sum(per_row) / static_cast<double>(per_row.size());
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 8;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (const double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

// ---------------------------------------------------------------------------
// File format

void save_table(const LookupTable& table, std::ostream& out) {
    out << "# qnv lookup table\n";
    out << "tau " << format_number(table.tau) << '\n';
    out << "alpha_prev " << action_name(table.alpha_prev) << '\n';
    out << "axes " << table.scheme.dims() << '\n';
    save_scheme(table.scheme, out);
    out << "rows " << table.scores.rows() << '\n';
    std::string line;
    for (Eigen::Index r = 0; r < table.scores.rows(); ++r) {
        line = detail::join_numbers(table.scores.row(r).data(), static_cast<std::size_t>(table.scores.cols()),
                                    Precision::Double);
        line += '\n';
        out << line;
    }
}

namespace {

std::string_view expect_key(detail::LineReader& reader, std::string_view key) {
    const auto line = reader.expect(key);
    const auto fields = detail::split_ws(line);
    if (fields.size() != 2 || fields[0] != key) {
        throw ParseError("expected '" + std::string(key) + " <value>'", reader.line());
    }
    return fields[1];
}

std::uint64_t parse_count(std::string_view text, std::size_t line) {
    const auto v = parse_double(text);
    if (!v || *v < 0 || *v != std::floor(*v) || *v > 9e15) throw ParseError("malformed count", line);
    return static_cast<std::uint64_t>(*v);
}

}  // namespace

LookupTable load_table(std::istream& in) {
    detail::LineReader reader(in);
    const auto tau = parse_double(expect_key(reader, "tau"));
    if (!tau || !std::isfinite(*tau)) throw ParseError("malformed tau", reader.line());
    const auto alpha = parse_action(expect_key(reader, "alpha_prev"));
    if (!alpha) throw ParseError("unknown action", reader.line());
    const auto axes = parse_count(expect_key(reader, "axes"), reader.line());
    QuantScheme scheme = detail::read_scheme_lines(reader, static_cast<std::size_t>(axes));
    const auto rows = parse_count(expect_key(reader, "rows"), reader.line());
    if (rows != scheme.grid_size()) {
        throw ParseError("row count " + std::to_string(rows) + " does not match grid size " +
                         std::to_string(scheme.grid_size()),
                         reader.line());
    }
    RowMatrixXd scores(static_cast<Eigen::Index>(rows), 5);
    for (std::uint64_t r = 0; r < rows; ++r) {
        const auto line = reader.next();
        if (!line) {
            throw ParseError("truncated stream: expected " + std::to_string(rows) + " rows, found " +
                             std::to_string(r),
                             reader.line());
        }
        const auto v = detail::parse_number_list(*line, 5, Precision::Double, reader.line());
        for (Eigen::Index c = 0; c < 5; ++c) scores(static_cast<Eigen::Index>(r), c) = v[static_cast<std::size_t>(c)];
    }
    if (reader.next()) throw ParseError("unexpected trailing data", reader.line());
    return LookupTable{std::move(scheme), std::move(scores), *tau, *alpha};
}

void save_table_file(const LookupTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write table file " + path);
    save_table(table, out);
    if (!out) throw std::runtime_error("error writing table file " + path);
}

LookupTable load_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table file " + path);
    return load_table(in);
}

}  // namespace qnv
