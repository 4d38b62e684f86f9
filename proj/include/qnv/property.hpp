#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "qnv/common.hpp"
#include "qnv/quantizer.hpp"

namespace qnv {

enum class Comparison : std::uint8_t { Le, Ge };

/// Boolean expression over the five advisory scores.
///
/// Atoms: argmax_is(a), argmax_in({a, ...}), score(a) <=/>= c and
/// score(a) - score(b) <=/>= c. Connectives: n-ary and/or, not.
/// Argmax ties resolve to the lowest action index.
struct OutputPredicate {
    enum class Kind : std::uint8_t { ArgmaxIs, ArgmaxIn, Score, ScoreDiff, And, Or, Not };

    Kind kind = Kind::ArgmaxIs;
    std::vector<Action> actions;  // ArgmaxIs: 1, ArgmaxIn: >= 1, Score: 1, ScoreDiff: 2
    Comparison cmp = Comparison::Le;
    double bound = 0.0;
    std::vector<OutputPredicate> children;

    static OutputPredicate argmax_is(Action a);
    static OutputPredicate argmax_in(std::vector<Action> set);
    static OutputPredicate score(Action a, Comparison cmp, double bound);
    static OutputPredicate score_diff(Action a, Action b, Comparison cmp, double bound);
    static OutputPredicate all_of(std::vector<OutputPredicate> terms);
    static OutputPredicate any_of(std::vector<OutputPredicate> terms);
    static OutputPredicate negate(OutputPredicate term);

    bool operator==(const OutputPredicate&) const = default;
};

bool check_output(const OutputPredicate& pred, const VectorXd& scores);

std::string to_string(const OutputPredicate& pred);

/// Safety property: for every input in `input_box`, `output` holds on the
/// network scores. Grid states are selected from the (slack-widened) box
/// according to `mode`.
struct Property {
    std::string name;
    std::string network_id;  // empty matches any network
    Box input_box;
    OutputPredicate output;
    BoxMode mode = BoxMode::InBox;
    double slack = 0.0;

    bool operator==(const Property&) const = default;
};

/// Parses every `property` block in `text`. Dimensions that a block does not
/// constrain span their full axis range in `scheme`.
std::vector<Property> parse_properties(std::string_view text, const QuantScheme& scheme);

/// Parses text holding exactly one property block.
Property parse_property(std::string_view text, const QuantScheme& scheme);

OutputPredicate parse_predicate(std::string_view text);

std::vector<Property> load_properties_file(const std::string& path, const QuantScheme& scheme);

/// Text form accepted by parse_property; every dimension is written out.
std::string print_property(const Property& prop, const QuantScheme& scheme);

}  // namespace qnv
