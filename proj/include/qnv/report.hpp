#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qnv/enum_verifier.hpp"
#include "qnv/interval.hpp"

namespace qnv {

inline constexpr std::string_view kToolName = "qnv";
inline constexpr std::string_view kToolVersion = "0.1.0";

nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const IntervalVerdict& v);

std::string to_text(const Verdict& v);
std::string to_text(const IntervalVerdict& v);

/// Shared envelope for every subcommand's machine-readable output.
struct RunReport {
    std::string tool{kToolName};
    std::string version{kToolVersion};
    std::string command;
    std::map<std::string, std::string> inputs;
    std::vector<std::pair<std::string, double>> timings;  // phase, seconds; in run order
    nlohmann::json result = nlohmann::json::object();
    int exit_status = 0;

    bool operator==(const RunReport&) const = default;
};

nlohmann::json to_json(const RunReport& r);
/// Throws nlohmann::json::exception on a malformed document.
RunReport run_report_from_json(const nlohmann::json& j);

}  // namespace qnv
