#include "qnv/report.hpp"

#include <sstream>

namespace qnv {

namespace {

nlohmann::json vec_json(const VectorXd& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

std::string vec_text(const VectorXd& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_number(v[i]);
    }
    return s + "]";
}

}  // namespace

nlohmann::json to_json(const Verdict& v) {
    nlohmann::json j;
    j["property"] = v.property;
    j["status"] = std::string(status_name(v.status));
    j["states_checked"] = v.states_checked;
    j["violations"] = v.violations;
    j["wall_time_s"] = v.wall_time;
    auto cex = nlohmann::json::array();
    for (const auto& c : v.counterexamples) {
        cex.push_back({{"index", c.index.flat}, {"point", vec_json(c.point)}, {"scores", vec_json(c.scores)}});
    }
    j["counterexamples"] = std::move(cex);
    return j;
}

nlohmann::json to_json(const IntervalVerdict& v) {
    nlohmann::json j;
    j["property"] = v.property;
    j["status"] = std::string(status_name(v.status));
    j["boxes_explored"] = v.boxes_explored;
    j["max_depth_reached"] = v.max_depth_reached;
    j["wall_time_s"] = v.wall_time;
    if (v.witness) j["witness"] = {{"point", vec_json(*v.witness)}, {"scores", vec_json(v.witness_scores)}};
    return j;
}

std::string to_text(const Verdict& v) {
    std::ostringstream out;
    out << "property " << v.property << ": " << status_name(v.status) << '\n';
    out << "states_checked " << v.states_checked << '\n';
    out << "violations " << v.violations << '\n';
    out << "wall_time_s " << format_number(v.wall_time) << '\n';
    for (const auto& c : v.counterexamples) {
        out << "counterexample " << c.index.flat << " point " << vec_text(c.point) << " scores " << vec_text(c.scores)
            << '\n';
    }
    if (v.counterexamples.size() < v.violations) {
        out << "(" << v.violations - v.counterexamples.size() << " more counterexamples not listed)\n";
    }
    return out.str();
}

std::string to_text(const IntervalVerdict& v) {
    std::ostringstream out;
    out << "property " << v.property << ": " << status_name(v.status) << '\n';
    out << "boxes_explored " << v.boxes_explored << '\n';
    out << "max_depth_reached " << (v.max_depth_reached ? "yes" : "no") << '\n';
    out << "wall_time_s " << format_number(v.wall_time) << '\n';
    if (v.witness) out << "witness point " << vec_text(*v.witness) << " scores " << vec_text(v.witness_scores) << '\n';
    return out.str();
}

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json j;
    j["tool"] = r.tool;
    j["version"] = r.version;
    j["command"] = r.command;
    j["inputs"] = r.inputs;
    auto timings = nlohmann::json::array();
    for (const auto& [phase, secs] : r.timings) timings.push_back({{"phase", phase}, {"seconds", secs}});
    j["timings"] = std::move(timings);
    j["result"] = r.result;
    j["exit_status"] = r.exit_status;
    return j;
}

RunReport run_report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.tool = j.at("tool").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    for (const auto& t : j.at("timings")) {
        r.timings.emplace_back(t.at("phase").get<std::string>(), t.at("seconds").get<double>());
    }
    r.result = j.at("result");
    r.exit_status = j.at("exit_status").get<int>();
    return r;
}

}  // namespace qnv
