#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "qnv/common.hpp"
#include "qnv/quantizer.hpp"

namespace qnv {

/// Advisory scores on every grid point of `scheme`; row i is flat index i.
struct LookupTable {
    QuantScheme scheme;
    RowMatrixXd scores;  // grid_size x 5
    double tau = 5.0;
    Action alpha_prev = Action::WR;

    bool operator==(const LookupTable& o) const {
        return scheme == o.scheme && same_values(scores, o.scores) && tau == o.tau && alpha_prev == o.alpha_prev;
    }
};

/// Analytic stand-in for a collision-avoidance score table. State order is
/// (rho, theta, psi, v_own, v_int). With theta_rel = theta + psi/2 wrapped
/// to [-pi, pi] and base = exp(-rho/20000) * (1 + (v_int - v_own)/400):
///
///   score_a = -|theta_rel - t_a| * base + 0.1 * [a == COC] * (1 - base)
///
/// for turn offsets t = {COC: 0, WL: 0.35, WR: -0.35, SL: 1.05, SR: -1.05}.
VectorXd synthetic_scores(const VectorXd& state);

/// Requires axes named rho, theta, psi, v_own and v_int, in any order.
LookupTable generate_synthetic_table(const QuantScheme& scheme, double tau = 5.0, Action alpha_prev = Action::WR);

/// Fraction of rows whose argmax (lowest index on ties) agrees.
double policy_accuracy(const RowMatrixXd& predicted, const LookupTable& table);

enum class ScoreNorm : std::uint8_t { L1, L2 };

/// Mean over rows of the L1 or L2 norm of the score difference.
double score_error(const RowMatrixXd& predicted, const LookupTable& table, ScoreNorm norm);

/// Pairwise summation with a fixed tree shape: the result depends only on
/// the values and their order.
double pairwise_sum(std::span<const double> values);

void save_table(const LookupTable& table, std::ostream& out);
LookupTable load_table(std::istream& in);
void save_table_file(const LookupTable& table, const std::string& path);
LookupTable load_table_file(const std::string& path);

}  // namespace qnv
