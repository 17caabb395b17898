#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracle.hpp"
#include "pipeline.hpp"
#include "sea.hpp"
#include "trace.hpp"

namespace sspread {

inline constexpr const char* kReportSchema = "sspread.report.v1";

/// One window per JSON line. Entries are already address-sorted; hosts are
/// rendered dotted-quad. Timing fields are opt-in because they vary run to
/// run, and report files are meant to be byte-comparable across runs and
/// worker counts.
inline void write_report_line(std::ostream& out, const WindowReport& report,
                              bool include_timings = false) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["window_start"] = report.window_start;
    j["window"] = report.window;
    auto entries = nlohmann::ordered_json::array();
    for (const auto& e : report.entries) {
        nlohmann::ordered_json je;
        je["host"] = format_ipv4(e.host);
        je["weight"] = e.union_weight;
        if (e.estimate) je["estimate"] = *e.estimate;
        else je["estimate"] = nullptr;
        je["saturated"] = !e.estimate.has_value();
        je["super"] = e.is_super;
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    if (include_timings) {
        j["scan_ms"] = report.scan_ms;
        j["estimate_ms"] = report.estimate_ms;
    }
    out << j.dump() << '\n';
}

inline WindowReport parse_report_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.value("schema", "") != kReportSchema)
            throw InputError("unexpected report schema: " + j.value("schema", "(none)"));
        WindowReport r;
        r.window_start = j.at("window_start").get<uint64_t>();
        r.window = j.at("window").get<uint32_t>();
        for (const auto& je : j.at("entries")) {
            WindowEntry e;
            const auto host = parse_ipv4(je.at("host").get<std::string>());
            if (!host) throw InputError("malformed host address in report entry");
            e.host = *host;
            e.union_weight = je.at("weight").get<uint32_t>();
            if (!je.at("estimate").is_null()) e.estimate = je.at("estimate").get<double>();
            e.is_super = je.at("super").get<bool>();
            r.entries.push_back(e);
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed report line: ") + e.what());
    }
}

inline std::vector<WindowReport> read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open report: " + path);
    std::vector<WindowReport> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(parse_report_line(line));
    }
    return out;
}

/// Truth lines: `window_start,host,cardinality`, host dotted-quad, sorted
/// by (window, address) — produced that way by the oracle runner.
inline void write_truth_line(std::ostream& out, const TruthEntry& t) {
    out << t.window_start << ',' << format_ipv4(t.host) << ',' << t.cardinality << '\n';
}

inline std::vector<TruthEntry> read_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open truth file: " + path);
    std::vector<TruthEntry> out;
    std::string line;
    uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw InputError("malformed truth line " + std::to_string(lineno) + " in " + path);
        TruthEntry t;
        try {
            t.window_start = std::stoull(line.substr(0, c1));
            t.cardinality = std::stoull(line.substr(c2 + 1));
        } catch (const std::exception&) {
            throw InputError("malformed truth line " + std::to_string(lineno) + " in " + path);
        }
        const auto host = parse_ipv4(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
        if (!host) throw InputError("malformed truth line " + std::to_string(lineno) + " in " + path);
        t.host = *host;
        out.push_back(t);
    }
    return out;
}

/// Per-window comparison of a detection report against ground truth.
/// Metrics are empty (undefined) for windows whose truth set is empty.
struct WindowScore {
    uint64_t window_start = 0;
    std::optional<AccuracyMetrics> metrics;
};

struct Evaluation {
    std::vector<WindowScore> windows;
    double mean_fpr = 0, mean_fnr = 0, mean_tfr = 0;
    uint64_t defined_windows = 0;
};

/// Joins report windows with truth windows. Every truth window must appear
/// in the report; report windows absent from the truth evaluate as
/// undefined (no true super points).
inline Evaluation evaluate_windows(const std::vector<WindowReport>& reports,
                                   const std::vector<TruthEntry>& truth) {
    std::map<uint64_t, std::set<uint32_t>> truth_by_window;
    for (const auto& t : truth) truth_by_window[t.window_start].insert(t.host);

    std::set<uint64_t> report_windows;
    Evaluation ev;
    for (const auto& r : reports) {
        report_windows.insert(r.window_start);
        std::set<uint32_t> detected;
        for (const auto& e : r.entries)
            if (e.is_super) detected.insert(e.host);
        const auto it = truth_by_window.find(r.window_start);
        WindowScore ws;
        ws.window_start = r.window_start;
        if (it != truth_by_window.end()) ws.metrics = score(detected, it->second);
        ev.windows.push_back(ws);
        if (ws.metrics) {
            ev.mean_fpr += ws.metrics->fpr;
            ev.mean_fnr += ws.metrics->fnr;
            ev.mean_tfr += ws.metrics->tfr;
            ++ev.defined_windows;
        }
    }
    for (const auto& [w, hosts] : truth_by_window)
        if (!report_windows.count(w))
            throw InputError("unmatched window " + std::to_string(w) +
                             ": present in truth, missing from report");
    if (ev.defined_windows > 0) {
        ev.mean_fpr /= static_cast<double>(ev.defined_windows);
        ev.mean_fnr /= static_cast<double>(ev.defined_windows);
        ev.mean_tfr /= static_cast<double>(ev.defined_windows);
    }
    return ev;
}

}  // namespace sspread
