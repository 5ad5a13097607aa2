#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "confluence/evaluation.hpp"
#include "confluence/pipeline.hpp"

namespace confluence {

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSON/CSV syntax, schema mismatch, or (strict mode)
/// an invalid record.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DetectionFormat { json, csv };

struct LoadOptions {
    bool strict = false;
    double score_floor = 0.01;
    DetectionFormat format = DetectionFormat::json;
};

struct LoadedDetections {
    DetectionsByImage by_image;  // each image ordered by class, then file order
    std::size_t records = 0;
    std::size_t dropped_low_score = 0;  // below the score floor
    std::size_t dropped_invalid = 0;    // lenient mode only

    std::size_t kept() const noexcept {
        std::size_t n = 0;
        for (const auto& [_, v] : by_image) n += v.size();
        return n;
    }
};

struct GroundTruthSet {
    GroundTruthByImage by_image;  // every listed image has an entry, possibly empty
    std::map<std::int64_t, std::string> categories;
    std::size_t dropped_invalid = 0;

    std::size_t annotation_count() const noexcept {
        std::size_t n = 0;
        for (const auto& [_, v] : by_image) n += v.size();
        return n;
    }
};

namespace detail {

struct RawRecord {
    std::int64_t image_id;
    std::int64_t category_id;
    double x, y, w, h, score;
};

/// Returns an empty string when the record is valid, else the reason.
inline std::string invalid_reason(const RawRecord& r) {
    for (double v : {r.x, r.y, r.w, r.h, r.score}) {
        if (!std::isfinite(v)) return "non-finite value";
    }
    if (!(r.w > 0.0) || !(r.h > 0.0)) return "bbox width and height must be positive";
    if (r.score < 0.0 || r.score > 1.0) return "score must lie in (0, 1]";
    return {};
}

class DetectionCollector {
public:
    explicit DetectionCollector(const LoadOptions& options) : options_(options) {}

    void add(const RawRecord& r, std::size_t index) {
        ++out_.records;
        if (auto reason = invalid_reason(r); !reason.empty()) {
            if (options_.strict) throw ParseError("record " + std::to_string(index) + ": " + reason);
            ++out_.dropped_invalid;
            return;
        }
        const auto box = BoxCorners::from_xywh(r.x, r.y, r.w, r.h);
        if (box.degenerate()) {
            if (options_.strict) throw ParseError("record " + std::to_string(index) + ": degenerate box");
            ++out_.dropped_invalid;
            return;
        }
        if (r.score <= 0.0 || r.score < options_.score_floor) {
            ++out_.dropped_low_score;
            return;
        }
        out_.by_image[r.image_id].push_back({box, r.score, r.category_id, next_id_++, r.image_id});
    }

    LoadedDetections finish() && {
        for (auto& [_, v] : out_.by_image) {
            std::stable_sort(v.begin(), v.end(),
                             [](const Detection& a, const Detection& b) { return a.class_id < b.class_id; });
        }
        return std::move(out_);
    }

private:
    LoadOptions options_;
    LoadedDetections out_;
    std::uint64_t next_id_ = 0;
};

inline nlohmann::json parse_json(std::istream& in) {
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

template <typename T>
T field(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    const auto& v = obj.at(key);
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ParseError(where + ": field '" + key + "' must be an integer");
    } else {
        if (!v.is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
    }
    return v.get<T>();
}

inline std::array<double, 4> bbox_field(const nlohmann::json& obj, const std::string& where) {
    if (!obj.contains("bbox") || !obj.at("bbox").is_array() || obj.at("bbox").size() != 4) {
        throw ParseError(where + ": 'bbox' must be an array of 4 numbers");
    }
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& v = obj.at("bbox")[i];
        if (!v.is_number()) throw ParseError(where + ": 'bbox' must be an array of 4 numbers");
        out[i] = v.get<double>();
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end && !text.empty();
}

inline std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

}  // namespace detail

inline constexpr std::string_view kCsvHeader = "image_id,category_id,x,y,w,h,score";

inline LoadedDetections load_detections(std::istream& in, const LoadOptions& options = {}) {
    detail::DetectionCollector collector(options);
    if (options.format == DetectionFormat::json) {
        const auto doc = detail::parse_json(in);
        if (!doc.is_array()) throw ParseError("detection file must be a JSON array of records");
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto& rec = doc[i];
            const std::string where = "record " + std::to_string(i);
            const auto bb = detail::bbox_field(rec, where);
            collector.add({detail::field<std::int64_t>(rec, "image_id", where),
                           detail::field<std::int64_t>(rec, "category_id", where), bb[0], bb[1], bb[2], bb[3],
                           detail::field<double>(rec, "score", where)},
                          i);
        }
        return std::move(collector).finish();
    }

    std::string line;
    if (!std::getline(in, line)) return std::move(collector).finish();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("CSV header must be '" + std::string(kCsvHeader) + "'");
    std::size_t index = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        for (auto pos = rest.find(','); pos != std::string_view::npos; pos = rest.find(',')) {
            cells.push_back(rest.substr(0, pos));
            rest.remove_prefix(pos + 1);
        }
        cells.push_back(rest);
        detail::RawRecord r{};
        const bool ok = cells.size() == 7 && detail::parse_number(cells[0], r.image_id) &&
                        detail::parse_number(cells[1], r.category_id) && detail::parse_number(cells[2], r.x) &&
                        detail::parse_number(cells[3], r.y) && detail::parse_number(cells[4], r.w) &&
                        detail::parse_number(cells[5], r.h) && detail::parse_number(cells[6], r.score);
        if (!ok) throw ParseError("CSV line " + std::to_string(line_no) + ": expected 7 numeric fields");
        collector.add(r, index++);
    }
    return std::move(collector).finish();
}

inline LoadedDetections load_detections(const std::filesystem::path& path, const LoadOptions& options = {}) {
    auto in = detail::open_input(path);
    try {
        return load_detections(in, options);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Kept detections in output order: image, class, descending score, stable id.
inline std::vector<KeptDetection> ordered_records(const ResultsByImage& results) {
    std::vector<KeptDetection> all;
    for (const auto& [_, r] : results) all.insert(all.end(), r.kept.begin(), r.kept.end());
    std::sort(all.begin(), all.end(), [](const KeptDetection& a, const KeptDetection& b) {
        if (a.detection.image_id != b.detection.image_id) return a.detection.image_id < b.detection.image_id;
        if (a.detection.class_id != b.detection.class_id) return a.detection.class_id < b.detection.class_id;
        if (a.final_score != b.final_score) return a.final_score > b.final_score;
        return a.detection.stable_id < b.detection.stable_id;
    });
    return all;
}

inline void write_detections(const ResultsByImage& results, std::ostream& out,
                             DetectionFormat format = DetectionFormat::json) {
    const auto records = ordered_records(results);
    if (format == DetectionFormat::csv) {
        out << kCsvHeader << '\n';
        for (const auto& k : records) {
            const auto& b = k.detection.box;
            out << k.detection.image_id << ',' << k.detection.class_id << ',' << detail::format_number(b.x1()) << ','
                << detail::format_number(b.y1()) << ',' << detail::format_number(b.width()) << ','
                << detail::format_number(b.height()) << ',' << detail::format_number(k.final_score) << '\n';
        }
    } else {
        auto doc = nlohmann::json::array();
        for (const auto& k : records) {
            const auto& b = k.detection.box;
            doc.push_back({{"image_id", k.detection.image_id},
                           {"category_id", k.detection.class_id},
                           {"bbox", {b.x1(), b.y1(), b.width(), b.height()}},
                           {"score", k.final_score}});
        }
        out << doc.dump() << '\n';
    }
    if (!out) throw IoError("failed writing detections");
}

inline void write_detections(const ResultsByImage& results, const std::filesystem::path& path,
                             DetectionFormat format = DetectionFormat::json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    try {
        write_detections(results, out, format);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

/// Parses the COCO annotation subset: images, annotations, categories.
inline GroundTruthSet load_ground_truth(std::istream& in, bool strict = false) {
    const auto doc = detail::parse_json(in);
    if (!doc.is_object()) throw ParseError("annotation file must be a JSON object");
    GroundTruthSet out;

    std::set<std::int64_t> images;
    if (doc.contains("images")) {
        for (std::size_t i = 0; i < doc["images"].size(); ++i) {
            const auto id = detail::field<std::int64_t>(doc["images"][i], "id", "image " + std::to_string(i));
            images.insert(id);
            out.by_image[id];
        }
    }
    if (doc.contains("categories")) {
        for (const auto& c : doc["categories"]) {
            const auto id = detail::field<std::int64_t>(c, "id", "category");
            out.categories[id] = c.contains("name") && c["name"].is_string() ? c["name"].get<std::string>() : "";
        }
    }
    if (!doc.contains("annotations")) return out;
    if (!doc["annotations"].is_array()) throw ParseError("'annotations' must be an array");

    for (std::size_t i = 0; i < doc["annotations"].size(); ++i) {
        const auto& a = doc["annotations"][i];
        const auto id = a.contains("id") && a["id"].is_number_integer() ? a["id"].get<std::int64_t>()
                                                                          : static_cast<std::int64_t>(i);
        const std::string where = "annotation " + std::to_string(id);
        const auto image_id = detail::field<std::int64_t>(a, "image_id", where);
        if (!images.contains(image_id)) {
            throw ParseError(where + " references unknown image_id " + std::to_string(image_id));
        }
        const auto bb = detail::bbox_field(a, where);
        if (!(bb[2] > 0.0) || !(bb[3] > 0.0) || !std::isfinite(bb[0]) || !std::isfinite(bb[1])) {
            if (strict) throw ParseError(where + ": bbox width and height must be positive");
            ++out.dropped_invalid;
            continue;
        }
        const bool crowd = a.contains("iscrowd") && a["iscrowd"].is_number() && a["iscrowd"].get<int>() != 0;
        std::optional<double> area;
        if (a.contains("area") && a["area"].is_number()) area = a["area"].get<double>();
        out.by_image[image_id].push_back(GroundTruthBox::make(BoxCorners::from_xywh(bb[0], bb[1], bb[2], bb[3]),
                                                              detail::field<std::int64_t>(a, "category_id", where),
                                                              image_id, crowd, area, id));
    }
    return out;
}

inline GroundTruthSet load_ground_truth(const std::filesystem::path& path, bool strict = false) {
    auto in = detail::open_input(path);
    try {
        return load_ground_truth(in, strict);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace confluence
