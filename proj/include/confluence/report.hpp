#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "confluence/bench.hpp"
#include "confluence/detection_io.hpp"
#include "confluence/evaluation.hpp"
#include "confluence/pipeline.hpp"

namespace confluence::report {

enum class Format { text, json, csv };

inline std::string fixed(double v, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

inline nlohmann::json to_json(const EvalSummary& s) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, value] : s.metrics()) j[std::string(name)] = value;
    return j;
}

/// The classic 12-line COCO summary block.
inline void summary_text(std::ostream& out, const EvalSummary& s) {
    struct Line {
        const char* kind;
        const char* iou;
        const char* area;
        int dets;
    };
    static constexpr Line lines[12] = {
        {"Average Precision  (AP)", "0.50:0.95", "   all", 100}, {"Average Precision  (AP)", "0.50     ", "   all", 100},
        {"Average Precision  (AP)", "0.75     ", "   all", 100}, {"Average Precision  (AP)", "0.50:0.95", " small", 100},
        {"Average Precision  (AP)", "0.50:0.95", "medium", 100}, {"Average Precision  (AP)", "0.50:0.95", " large", 100},
        {"Average Recall     (AR)", "0.50:0.95", "   all", 1},   {"Average Recall     (AR)", "0.50:0.95", "   all", 10},
        {"Average Recall     (AR)", "0.50:0.95", "   all", 100}, {"Average Recall     (AR)", "0.50:0.95", " small", 100},
        {"Average Recall     (AR)", "0.50:0.95", "medium", 100}, {"Average Recall     (AR)", "0.50:0.95", " large", 100},
    };
    const auto metrics = s.metrics();
    for (std::size_t i = 0; i < 12; ++i) {
        out << ' ' << lines[i].kind << " @[ IoU=" << lines[i].iou << " | area=" << lines[i].area
            << " | maxDets=" << std::setw(3) << lines[i].dets << " ] = " << fixed(metrics[i].second) << '\n';
    }
}

/// Long-format rows: threshold, metric, value. `threshold` may be empty.
inline void summary_csv_rows(std::ostream& out, const std::string& threshold, const EvalSummary& s) {
    for (const auto& [name, value] : s.metrics()) out << threshold << ',' << name << ',' << detail::format_number(value) << '\n';
}

inline void summary(std::ostream& out, Format format, const EvalSummary& s, const std::string& threshold = "") {
    switch (format) {
        case Format::text: summary_text(out, s); break;
        case Format::json: out << to_json(s).dump(2) << '\n'; break;
        case Format::csv:
            out << "threshold,metric,value\n";
            summary_csv_rows(out, threshold, s);
            break;
    }
}

inline void sweep(std::ostream& out, Format format, const SweepReport& r, Algorithm algorithm) {
    switch (format) {
        case Format::csv:
            out << "threshold,metric,value\n";
            for (const auto& row : r.rows) out << detail::format_number(row.threshold) << ",AP," << detail::format_number(row.summary.ap) << '\n';
            out << ",AP_stability," << detail::format_number(r.stability) << '\n';
            break;
        case Format::json: {
            nlohmann::json j;
            j["algorithm"] = std::string(to_string(algorithm));
            j["rows"] = nlohmann::json::array();
            for (const auto& row : r.rows) j["rows"].push_back({{"threshold", row.threshold}, {"summary", to_json(row.summary)}});
            j["band"] = {r.band_lo, r.band_hi};
            j["AP_stability"] = r.stability;
            out << j.dump(2) << '\n';
            break;
        }
        case Format::text:
            out << "threshold    AP     AP50   AR100\n";
            for (const auto& row : r.rows) {
                out << std::setw(9) << fixed(row.threshold, 2) << "  " << fixed(row.summary.ap) << "  "
                    << fixed(row.summary.ap50) << "  " << fixed(row.summary.ar100) << '\n';
            }
            out << "AP stability (max-min) in [" << fixed(r.band_lo, 2) << ", " << fixed(r.band_hi, 2)
                << "]: " << fixed(r.stability, 4) << '\n';
            break;
    }
}

struct CompareRow {
    std::string label;
    EvalSummary summary;
};

inline void compare(std::ostream& out, Format format, const std::vector<CompareRow>& rows) {
    switch (format) {
        case Format::csv: {
            out << "config";
            for (const auto& [name, _] : EvalSummary{}.metrics()) out << ',' << name;
            out << '\n';
            for (const auto& row : rows) {
                out << '"' << row.label << '"';
                for (const auto& [_, v] : row.summary.metrics()) out << ',' << detail::format_number(v);
                out << '\n';
            }
            break;
        }
        case Format::json: {
            auto j = nlohmann::json::array();
            for (const auto& row : rows) j.push_back({{"config", row.label}, {"summary", to_json(row.summary)}});
            out << j.dump(2) << '\n';
            break;
        }
        case Format::text: {
            std::size_t width = 6;
            for (const auto& row : rows) width = std::max(width, row.label.size());
            out << std::left << std::setw(static_cast<int>(width)) << "config" << std::right;
            for (const auto& [name, _] : EvalSummary{}.metrics()) out << ' ' << std::setw(9) << name;
            out << '\n';
            for (const auto& row : rows) {
                out << std::left << std::setw(static_cast<int>(width)) << row.label << std::right;
                for (const auto& [_, v] : row.summary.metrics()) out << ' ' << std::setw(9) << fixed(v);
                out << '\n';
            }
            break;
        }
    }
}

inline void bench(std::ostream& out, Format format, const std::vector<BenchReport>& reports) {
    switch (format) {
        case Format::csv:
            out << "algorithm,n,median_seconds,exponent\n";
            for (const auto& r : reports) {
                for (const auto& row : r.rows) {
                    out << to_string(r.algorithm) << ',' << row.n << ',' << detail::format_number(row.median_seconds) << ','
                        << detail::format_number(r.exponent) << '\n';
                }
            }
            break;
        case Format::json: {
            auto j = nlohmann::json::array();
            for (const auto& r : reports) {
                nlohmann::json rows = nlohmann::json::array();
                for (const auto& row : r.rows) rows.push_back({{"n", row.n}, {"median_seconds", row.median_seconds}, {"kept", row.kept}});
                j.push_back({{"algorithm", std::string(to_string(r.algorithm))}, {"rows", rows}, {"exponent", r.exponent}});
            }
            out << j.dump(2) << '\n';
            break;
        }
        case Format::text:
            out << "algorithm              n   median_ms    kept\n";
            for (const auto& r : reports) {
                for (const auto& row : r.rows) {
                    out << std::left << std::setw(16) << to_string(r.algorithm) << std::right << std::setw(7) << row.n
                        << std::setw(12) << fixed(row.median_seconds * 1e3) << std::setw(8) << row.kept << '\n';
                }
                out << std::left << std::setw(16) << to_string(r.algorithm) << std::right
                    << " scaling exponent " << fixed(r.exponent, 2) << '\n';
            }
            break;
    }
}

}  // namespace confluence::report
