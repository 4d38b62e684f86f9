#include "qnv/interval.hpp"

#include <chrono>
#include <deque>

namespace qnv {

std::vector<Interval> interval_forward(const Network& net, const Box& box) {
    const Eigen::Index n = net.input_dim();
    if (static_cast<Eigen::Index>(box.size()) != n) {
        throw DimensionError("box has " + std::to_string(box.size()) + " intervals, network takes " +
                             std::to_string(n) + " inputs");
    }
    VectorXd lo(n);
    VectorXd hi(n);
    const auto& norm = net.normalization();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Interval& iv = box[static_cast<std::size_t>(i)];
        if (!(iv.lo <= iv.hi)) throw std::invalid_argument("invalid interval in box");
        const double a = (iv.lo - norm.means[i]) / norm.ranges[i];
        const double b = (iv.hi - norm.means[i]) / norm.ranges[i];
        lo[i] = std::min(a, b);
        hi[i] = std::max(a, b);
    }
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const RowMatrixXd pos = layers[l].weights.cwiseMax(0.0);
        const RowMatrixXd neg = layers[l].weights.cwiseMin(0.0);
        VectorXd next_lo = pos * lo + neg * hi + layers[l].biases;
        VectorXd next_hi = pos * hi + neg * lo + layers[l].biases;
        if (l + 1 < layers.size()) {
            next_lo = next_lo.cwiseMax(0.0);
            next_hi = next_hi.cwiseMax(0.0);
        }
        lo = std::move(next_lo);
        hi = std::move(next_hi);
    }
    std::vector<Interval> out(static_cast<std::size_t>(lo.size()));
    for (Eigen::Index i = 0; i < lo.size(); ++i) out[static_cast<std::size_t>(i)] = {lo[i], hi[i]};
    return out;
}

namespace {

Truth kleene_not(Truth t) {
    if (t == Truth::True) return Truth::False;
    if (t == Truth::False) return Truth::True;
    return Truth::Unknown;
}

Truth compare_interval(Interval v, Comparison cmp, double bound) {
    if (cmp == Comparison::Le) {
        if (v.hi <= bound) return Truth::True;
        if (v.lo > bound) return Truth::False;
    } else {
        if (v.lo >= bound) return Truth::True;
        if (v.hi < bound) return Truth::False;
    }
    return Truth::Unknown;
}

// Can `a` be the argmax for some scores in the box / is it for all of them?
// With lowest-index tie-breaking, a beats b < a only strictly and b > a on
// equality.
bool always_wins(const std::vector<Interval>& out, std::size_t a) {
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (b == a) continue;
        if (b < a ? !(out[a].lo > out[b].hi) : !(out[a].lo >= out[b].hi)) return false;
    }
    return true;
}

bool never_wins(const std::vector<Interval>& out, std::size_t a) {
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (b == a) continue;
        if (b < a ? out[b].lo >= out[a].hi : out[b].lo > out[a].hi) return true;
    }
    return false;
}

}  // namespace

Truth evaluate_interval(const OutputPredicate& pred, const std::vector<Interval>& out) {
    using Kind = OutputPredicate::Kind;
    switch (pred.kind) {
        case Kind::ArgmaxIs: {
            const auto a = static_cast<std::size_t>(pred.actions[0]);
            if (always_wins(out, a)) return Truth::True;
            if (never_wins(out, a)) return Truth::False;
            return Truth::Unknown;
        }
        case Kind::ArgmaxIn: {
            bool all_never = true;
            for (const Action a : pred.actions) {
                const auto i = static_cast<std::size_t>(a);
                if (always_wins(out, i)) return Truth::True;
                all_never = all_never && never_wins(out, i);
            }
            return all_never ? Truth::False : Truth::Unknown;
        }
        case Kind::Score:
            return compare_interval(out.at(static_cast<std::size_t>(pred.actions[0])), pred.cmp, pred.bound);
        case Kind::ScoreDiff: {
            const Interval a = out.at(static_cast<std::size_t>(pred.actions[0]));
            const Interval b = out.at(static_cast<std::size_t>(pred.actions[1]));
            return compare_interval({a.lo - b.hi, a.hi - b.lo}, pred.cmp, pred.bound);
        }
        case Kind::And: {
            Truth acc = Truth::True;
            for (const auto& c : pred.children) {
                const Truth t = evaluate_interval(c, out);
                if (t == Truth::False) return Truth::False;
                if (t == Truth::Unknown) acc = Truth::Unknown;
            }
            return acc;
        }
        case Kind::Or: {
            Truth acc = Truth::False;
            for (const auto& c : pred.children) {
                const Truth t = evaluate_interval(c, out);
                if (t == Truth::True) return Truth::True;
                if (t == Truth::Unknown) acc = Truth::Unknown;
            }
            return acc;
        }
        case Kind::Not:
            return kleene_not(evaluate_interval(pred.children.at(0), out));
    }
    return Truth::Unknown;
}

IntervalVerdict bisect_verify(const Network& net, const Property& prop, const BisectOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const Box& root = prop.input_box;
    if (static_cast<Eigen::Index>(root.size()) != net.input_dim()) {
        throw DimensionError("property box does not match the network input");
    }
    IntervalVerdict verdict;
    verdict.property = prop.name;

    struct Item {
        Box box;
        unsigned depth;
    };
    std::deque<Item> work;
    work.push_back({root, 0});
    bool unresolved = false;

    auto finish = [&](VerdictStatus status) {
        verdict.status = status;
        verdict.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return verdict;
    };

    while (!work.empty()) {
        if (verdict.boxes_explored >= opts.max_boxes) return finish(VerdictStatus::Unknown);
        Item item = std::move(work.front());
        work.pop_front();
        ++verdict.boxes_explored;

        if (evaluate_interval(prop.output, interval_forward(net, item.box)) == Truth::True) continue;

        VectorXd center(static_cast<Eigen::Index>(item.box.size()));
        for (std::size_t i = 0; i < item.box.size(); ++i) {
            center[static_cast<Eigen::Index>(i)] = item.box[i].lo + (item.box[i].hi - item.box[i].lo) / 2.0;
        }
        VectorXd scores = net.forward(center);
        if (!check_output(prop.output, scores)) {
            verdict.witness = std::move(center);
            verdict.witness_scores = std::move(scores);
            return finish(VerdictStatus::Violated);
        }

        if (item.depth >= opts.max_depth) {
            verdict.max_depth_reached = true;
            unresolved = true;
            continue;
        }
        std::size_t split = item.box.size();
        double widest = 0.0;
        for (std::size_t i = 0; i < item.box.size(); ++i) {
            if (root[i].width() <= 0.0) continue;
            const double rel = item.box[i].width() / root[i].width();
            if (rel > widest) {
                widest = rel;
                split = i;
            }
        }
        const double mid = split < item.box.size() ? center[static_cast<Eigen::Index>(split)] : 0.0;
        if (split == item.box.size() || !(item.box[split].lo < mid && mid < item.box[split].hi)) {
            // Nothing left to split at double resolution.
            unresolved = true;
            continue;
        }
        Item left{item.box, item.depth + 1};
        Item right{std::move(item.box), item.depth + 1};
        left.box[split].hi = mid;
        right.box[split].lo = mid;
        work.push_back(std::move(left));
        work.push_back(std::move(right));
    }
    return finish(unresolved ? VerdictStatus::Unknown : VerdictStatus::Holds);
}

}  // namespace qnv
