#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <fftw3.h>
#include <json.hpp>

namespace cxqsm::eval {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

struct MetricEntry {
    std::string stage;    // complex | magnitude | phase | local_field | qsm | solver
    std::string method;
    std::string metric;
    std::optional<std::string> region;
    double value = 0.0;
};

/// Non-finite values become the strings "inf", "-inf", "nan".
inline nlohmann::ordered_json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

/// One JSON object {inputs, config, metrics[], versions}. Keys keep insertion
/// order and numbers are printed shortest-round-trip, so identical runs give
/// identical bytes.
struct Report {
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<MetricEntry> metrics;

    void add(std::string stage, std::string method, std::string metric, double value,
             std::optional<std::string> region = std::nullopt) {
        metrics.push_back({std::move(stage), std::move(method), std::move(metric), std::move(region), value});
    }

    const MetricEntry* find(const std::string& stage, const std::string& method, const std::string& metric) const {
        for (const MetricEntry& m : metrics)
            if (m.stage == stage && m.method == method && m.metric == metric && !m.region) return &m;
        return nullptr;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["inputs"] = inputs;
        j["config"] = config;
        j["metrics"] = nlohmann::ordered_json::array();
        for (const MetricEntry& m : metrics) {
            nlohmann::ordered_json e;
            e["stage"] = m.stage;
            e["method"] = m.method;
            e["metric"] = m.metric;
            if (m.region) e["region"] = *m.region;
            e["value"] = number(m.value);
            j["metrics"].push_back(std::move(e));
        }
        j["versions"]["cxqsm"] = kVersion;
        j["versions"]["report_schema"] = kReportSchema;
        j["versions"]["fftw"] = std::string(fftw_version);
        return j;
    }

    std::string dump() const { return to_json().dump(2) + "\n"; }
};

}  // namespace cxqsm::eval
