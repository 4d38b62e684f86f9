#include "qnv/property.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "text_io.hpp"

namespace qnv {

// ---------------------------------------------------------------------------
// Construction and evaluation

OutputPredicate OutputPredicate::argmax_is(Action a) {
    OutputPredicate p;
    p.kind = Kind::ArgmaxIs;
    p.actions = {a};
    return p;
}

OutputPredicate OutputPredicate::argmax_in(std::vector<Action> set) {
    if (set.empty()) throw std::invalid_argument("argmax_in needs at least one action");
    OutputPredicate p;
    p.kind = Kind::ArgmaxIn;
    p.actions = std::move(set);
    return p;
}

OutputPredicate OutputPredicate::score(Action a, Comparison cmp, double bound) {
    OutputPredicate p;
    p.kind = Kind::Score;
    p.actions = {a};
    p.cmp = cmp;
    p.bound = bound;
    return p;
}

OutputPredicate OutputPredicate::score_diff(Action a, Action b, Comparison cmp, double bound) {
    OutputPredicate p;
    p.kind = Kind::ScoreDiff;
    p.actions = {a, b};
    p.cmp = cmp;
    p.bound = bound;
    return p;
}

OutputPredicate OutputPredicate::all_of(std::vector<OutputPredicate> terms) {
    OutputPredicate p;
    p.kind = Kind::And;
    p.children = std::move(terms);
    return p;
}

OutputPredicate OutputPredicate::any_of(std::vector<OutputPredicate> terms) {
    OutputPredicate p;
    p.kind = Kind::Or;
    p.children = std::move(terms);
    return p;
}

OutputPredicate OutputPredicate::negate(OutputPredicate term) {
    OutputPredicate p;
    p.kind = Kind::Not;
    p.children = {std::move(term)};
    return p;
}

namespace {

bool compare(double lhs, Comparison cmp, double rhs) { return cmp == Comparison::Le ? lhs <= rhs : lhs >= rhs; }

Eigen::Index col(Action a) { return static_cast<Eigen::Index>(a); }

}  // namespace

bool check_output(const OutputPredicate& pred, const VectorXd& scores) {
    using Kind = OutputPredicate::Kind;
    switch (pred.kind) {
        case Kind::ArgmaxIs:
            return argmax(scores) == static_cast<std::size_t>(pred.actions[0]);
        case Kind::ArgmaxIn: {
            const auto best = static_cast<Action>(argmax(scores));
            for (const Action a : pred.actions) {
                if (a == best) return true;
            }
            return false;
        }
        case Kind::Score:
            return compare(scores[col(pred.actions[0])], pred.cmp, pred.bound);
        case Kind::ScoreDiff:
            return compare(scores[col(pred.actions[0])] - scores[col(pred.actions[1])], pred.cmp, pred.bound);
        case Kind::And:
            for (const auto& c : pred.children) {
                if (!check_output(c, scores)) return false;
            }
            return true;
        case Kind::Or:
            for (const auto& c : pred.children) {
                if (check_output(c, scores)) return true;
            }
            return false;
        case Kind::Not:
            return !check_output(pred.children.at(0), scores);
    }
    return false;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string cmp_text(Comparison c) { return c == Comparison::Le ? "<=" : ">="; }

bool is_composite(const OutputPredicate& p) {
    return p.kind == OutputPredicate::Kind::And || p.kind == OutputPredicate::Kind::Or;
}

std::string operand_text(const OutputPredicate& p) {
    return is_composite(p) ? "(" + to_string(p) + ")" : to_string(p);
}

}  // namespace

std::string to_string(const OutputPredicate& pred) {
    using Kind = OutputPredicate::Kind;
    std::string out;
    switch (pred.kind) {
        case Kind::ArgmaxIs:
            return "argmax_is " + std::string(action_name(pred.actions[0]));
        case Kind::ArgmaxIn:
            out = "argmax_in {";
            for (std::size_t i = 0; i < pred.actions.size(); ++i) {
                out += (i ? ", " : "") + std::string(action_name(pred.actions[i]));
            }
            return out + "}";
        case Kind::Score:
            return "score(" + std::string(action_name(pred.actions[0])) + ") " + cmp_text(pred.cmp) + " " +
                   format_number(pred.bound);
        case Kind::ScoreDiff:
            return "score(" + std::string(action_name(pred.actions[0])) + ") - score(" +
                   std::string(action_name(pred.actions[1])) + ") " + cmp_text(pred.cmp) + " " +
                   format_number(pred.bound);
        case Kind::And:
        case Kind::Or: {
            const char* sep = pred.kind == Kind::And ? " & " : " | ";
            for (std::size_t i = 0; i < pred.children.size(); ++i) {
                if (i) out += sep;
                out += operand_text(pred.children[i]);
            }
            return out;
        }
        case Kind::Not:
            return "!" + operand_text(pred.children.at(0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Predicate parser (recursive descent)
//
//   expr  := and ('|' and)*
//   and   := unary ('&' unary)*
//   unary := '!' unary | '(' expr ')' | atom
//   atom  := 'argmax_is' ACTION
//          | 'argmax_in' '{' ACTION (',' ACTION)* '}'
//          | 'score' '(' ACTION ')' ['-' 'score' '(' ACTION ')'] ('<=' | '>=') NUMBER

namespace {

struct Token {
    enum class Type { Word, Number, Punct, End } type;
    std::string text;
    std::size_t column;
};

std::vector<Token> tokenize(std::string_view s, std::size_t line, std::size_t column_offset) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < s.size()) {
        const char c = s[i];
        const std::size_t column = column_offset + i + 1;
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            const std::size_t start = i;
            while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
            if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
                ++i;
                if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            }
            tokens.push_back({Token::Type::Number, std::string(s.substr(start, i - start)), column});
        } else if (is_word(c)) {
            const std::size_t start = i;
            while (i < s.size() && is_word(s[i])) ++i;
            tokens.push_back({Token::Type::Word, std::string(s.substr(start, i - start)), column});
        } else if ((c == '<' || c == '>') && i + 1 < s.size() && s[i + 1] == '=') {
            tokens.push_back({Token::Type::Punct, std::string(s.substr(i, 2)), column});
            i += 2;
        } else if (std::string_view("()[]{},&|!-").find(c) != std::string_view::npos) {
            tokens.push_back({Token::Type::Punct, std::string(1, c), column});
            ++i;
        } else {
            throw ParseError(std::string("unexpected character '") + c + "'", line, column);
        }
    }
    tokens.push_back({Token::Type::End, "", column_offset + s.size() + 1});
    return tokens;
}

class PredicateParser {
public:
    PredicateParser(std::vector<Token> tokens, std::size_t line) : tokens_(std::move(tokens)), line_(line) {}

    OutputPredicate parse() {
        auto p = parse_or();
        if (peek().type != Token::Type::End) fail("unexpected '" + peek().text + "'");
        return p;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& take() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
    bool accept(std::string_view punct) {
        if (peek().type == Token::Type::Punct && peek().text == punct) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(std::string_view punct) {
        if (!accept(punct)) fail("expected '" + std::string(punct) + "'");
    }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, peek().column); }

    OutputPredicate parse_or() {
        std::vector<OutputPredicate> terms{parse_and()};
        while (accept("|")) terms.push_back(parse_and());
        return terms.size() == 1 ? std::move(terms.front()) : OutputPredicate::any_of(std::move(terms));
    }

    OutputPredicate parse_and() {
        std::vector<OutputPredicate> terms{parse_unary()};
        while (accept("&")) terms.push_back(parse_unary());
        return terms.size() == 1 ? std::move(terms.front()) : OutputPredicate::all_of(std::move(terms));
    }

    OutputPredicate parse_unary() {
        if (accept("!")) return OutputPredicate::negate(parse_unary());
        if (accept("(")) {
            auto p = parse_or();
            expect(")");
            return p;
        }
        return parse_atom();
    }

    Action parse_action_token() {
        if (peek().type != Token::Type::Word) fail("expected an action name");
        const auto a = qnv::parse_action(peek().text);
        if (!a) fail("unknown action '" + peek().text + "'");
        take();
        return *a;
    }

    Action parse_score_ref() {
        if (peek().type != Token::Type::Word || peek().text != "score") fail("expected 'score'");
        take();
        expect("(");
        const Action a = parse_action_token();
        expect(")");
        return a;
    }

    OutputPredicate parse_atom() {
        if (peek().type != Token::Type::Word) fail("expected a predicate");
        const std::string word = peek().text;
        if (word == "argmax_is") {
            take();
            return OutputPredicate::argmax_is(parse_action_token());
        }
        if (word == "argmax_in") {
            take();
            expect("{");
            std::vector<Action> set{parse_action_token()};
            while (accept(",")) set.push_back(parse_action_token());
            expect("}");
            return OutputPredicate::argmax_in(std::move(set));
        }
        if (word == "score") {
            const Action a = parse_score_ref();
            std::optional<Action> b;
            if (accept("-")) b = parse_score_ref();
            Comparison cmp{};
            if (accept("<=")) {
                cmp = Comparison::Le;
            } else if (accept(">=")) {
                cmp = Comparison::Ge;
            } else {
                fail("expected '<=' or '>='");
            }
            const double bound = parse_number();
            return b ? OutputPredicate::score_diff(a, *b, cmp, bound) : OutputPredicate::score(a, cmp, bound);
        }
        fail("unknown predicate '" + word + "'");
    }

    double parse_number() {
        const bool negative = accept("-");
        if (peek().type != Token::Type::Number) fail("expected a number");
        const auto v = parse_double(peek().text);
        if (!v || !std::isfinite(*v)) fail("malformed number '" + peek().text + "'");
        take();
        return negative ? -*v : *v;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

OutputPredicate parse_predicate_at(std::string_view text, std::size_t line, std::size_t column_offset) {
    return PredicateParser(tokenize(text, line, column_offset), line).parse();
}

// `<dim> in [<lo>, <hi>]`
std::pair<std::string, Interval> parse_input_clause(std::string_view rest, std::size_t line, std::size_t offset) {
    const auto tokens = tokenize(rest, line, offset);
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) -> ParseError { return ParseError(what, line, tokens[pos].column); };
    auto want_punct = [&](std::string_view p) {
        if (tokens[pos].type != Token::Type::Punct || tokens[pos].text != p) throw fail("expected '" + std::string(p) + "'");
        ++pos;
    };
    auto number = [&]() {
        bool negative = false;
        if (tokens[pos].type == Token::Type::Punct && tokens[pos].text == "-") {
            negative = true;
            ++pos;
        }
        if (tokens[pos].type != Token::Type::Number) throw fail("expected a number");
        const auto v = parse_double(tokens[pos].text);
        if (!v || !std::isfinite(*v)) throw fail("malformed number '" + tokens[pos].text + "'");
        ++pos;
        return negative ? -*v : *v;
    };
    if (tokens[pos].type != Token::Type::Word) throw fail("expected a dimension name");
    std::string dim = tokens[pos++].text;
    if (tokens[pos].type != Token::Type::Word || tokens[pos].text != "in") throw fail("expected 'in'");
    ++pos;
    want_punct("[");
    const double lo = number();
    want_punct(",");
    const double hi = number();
    want_punct("]");
    if (tokens[pos].type != Token::Type::End) throw fail("unexpected '" + tokens[pos].text + "'");
    return {std::move(dim), Interval{lo, hi}};
}

struct PendingProperty {
    Property prop;
    std::vector<bool> constrained;
    bool has_output = false;
    std::size_t line = 0;
};

void finish(PendingProperty& p, std::vector<Property>& out) {
    if (!p.has_output) throw ParseError("property '" + p.prop.name + "' has no output predicate", p.line);
    out.push_back(std::move(p.prop));
}

}  // namespace

OutputPredicate parse_predicate(std::string_view text) { return parse_predicate_at(text, 1, 0); }

std::vector<Property> parse_properties(std::string_view text, const QuantScheme& scheme) {
    std::vector<Property> out;
    std::optional<PendingProperty> cur;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        const std::string_view raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const std::size_t indent = static_cast<std::size_t>(line.data() - raw.data());
        const auto sp = line.find_first_of(" \t");
        const std::string_view key = line.substr(0, sp);
        const std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp));
        const std::size_t rest_offset = indent + static_cast<std::size_t>(rest.data() - line.data());

        if (key == "property") {
            if (cur) finish(*cur, out);
            if (rest.empty() || rest.find_first_of(" \t") != std::string_view::npos) {
                throw ParseError("property name must be a single word", line_no, rest_offset + 1);
            }
            for (const auto& prev : out) {
                if (prev.name == rest) throw ParseError("duplicate property '" + prev.name + "'", line_no, rest_offset + 1);
            }
            cur.emplace();
            cur->prop.name = std::string(rest);
            cur->prop.input_box = full_box(scheme);
            cur->constrained.assign(scheme.dims(), false);
            cur->line = line_no;
            continue;
        }
        if (!cur) throw ParseError("'" + std::string(key) + "' outside a property block", line_no, indent + 1);

        if (key == "network") {
            if (rest.empty()) throw ParseError("missing network id", line_no, indent + 1);
            cur->prop.network_id = std::string(rest);
        } else if (key == "mode") {
            if (rest == "inbox") {
                cur->prop.mode = BoxMode::InBox;
            } else if (rest == "image") {
                cur->prop.mode = BoxMode::QuantizedImage;
            } else {
                throw ParseError("mode must be 'inbox' or 'image'", line_no, rest_offset + 1);
            }
        } else if (key == "slack") {
            const auto v = parse_double(rest);
            if (!v || !std::isfinite(*v) || *v < 0) throw ParseError("slack must be a number >= 0", line_no, rest_offset + 1);
            cur->prop.slack = *v;
        } else if (key == "input") {
            auto [dim, interval] = parse_input_clause(rest, line_no, rest_offset);
            const auto axis = scheme.find_axis(dim);
            if (!axis) throw ParseError("unknown dimension '" + dim + "'", line_no, rest_offset + 1);
            if (cur->constrained[*axis]) throw ParseError("dimension '" + dim + "' constrained twice", line_no, rest_offset + 1);
            if (interval.lo > interval.hi) throw ParseError("inverted interval for '" + dim + "'", line_no, rest_offset + 1);
            cur->prop.input_box[*axis] = interval;
            cur->constrained[*axis] = true;
        } else if (key == "output") {
            if (cur->has_output) throw ParseError("property has more than one output predicate", line_no, indent + 1);
            cur->prop.output = parse_predicate_at(rest, line_no, rest_offset);
            cur->has_output = true;
        } else {
            throw ParseError("unknown keyword '" + std::string(key) + "'", line_no, indent + 1);
        }
    }
    if (cur) finish(*cur, out);
    return out;
}

Property parse_property(std::string_view text, const QuantScheme& scheme) {
    auto props = parse_properties(text, scheme);
    if (props.size() != 1) {
        throw ParseError("expected exactly one property, found " + std::to_string(props.size()), 1);
    }
    return std::move(props.front());
}

std::vector<Property> load_properties_file(const std::string& path, const QuantScheme& scheme) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open property file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_properties(buf.str(), scheme);
}

std::string print_property(const Property& prop, const QuantScheme& scheme) {
    if (prop.input_box.size() != scheme.dims()) throw DimensionError("property box does not match the scheme");
    std::string out = "property " + prop.name + "\n";
    if (!prop.network_id.empty()) out += "network " + prop.network_id + "\n";
    out += std::string("mode ") + (prop.mode == BoxMode::InBox ? "inbox" : "image") + "\n";
    if (prop.slack != 0.0) out += "slack " + format_number(prop.slack) + "\n";
    for (std::size_t i = 0; i < scheme.dims(); ++i) {
        out += "input " + scheme.axis(i).label() + " in [" + format_number(prop.input_box[i].lo) + ", " +
               format_number(prop.input_box[i].hi) + "]\n";
    }
    out += "output " + to_string(prop.output) + "\n";
    return out;
}

}  // namespace qnv
