#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "confluence/suppression.hpp"

namespace confluence {

/// Raised when flat input arrays disagree in length or violate corner order.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major N x 4 corner array (x1, y1, x2, y2) with per-row scores and classes.
struct FlatDetections {
    std::span<const double> boxes;
    std::span<const double> scores;
    std::span<const std::int64_t> classes;
};

struct FlatResult {
    std::vector<std::int64_t> kept_indices;  // ascending input rows
    std::vector<double> scores;              // final score per kept row
};

/// Array-in, index-out entry point for foreign callers. Row i gets stable id i.
inline FlatResult suppress_flat(const FlatDetections& flat, const SuppressionConfig& config) {
    const std::size_t n = flat.scores.size();
    if (flat.boxes.size() != n * 4) {
        throw ShapeError("boxes must have shape (N, 4) with N = " + std::to_string(n) + ", got " +
                         std::to_string(flat.boxes.size()) + " values");
    }
    if (flat.classes.size() != n) {
        throw ShapeError("classes must have length " + std::to_string(n) + ", got " +
                         std::to_string(flat.classes.size()));
    }
    std::vector<Detection> dets;
    dets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = flat.boxes.subspan(i * 4, 4);
        if (row[0] > row[2] || row[1] > row[3]) {
            throw ShapeError("row " + std::to_string(i) + ": corners must satisfy x1 <= x2 and y1 <= y2");
        }
        dets.push_back({BoxCorners{row[0], row[1], row[2], row[3]}, flat.scores[i], flat.classes[i],
                        static_cast<std::uint64_t>(i), 0});
    }

    auto result = suppress(dets, config);
    std::sort(result.kept.begin(), result.kept.end(), [](const KeptDetection& a, const KeptDetection& b) {
        return a.detection.stable_id < b.detection.stable_id;
    });
    FlatResult out;
    out.kept_indices.reserve(result.kept.size());
    out.scores.reserve(result.kept.size());
    for (const auto& k : result.kept) {
        out.kept_indices.push_back(static_cast<std::int64_t>(k.detection.stable_id));
        out.scores.push_back(k.final_score);
    }
    return out;
}

}  // namespace confluence
