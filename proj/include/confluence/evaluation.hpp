#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "confluence/detection.hpp"
#include "confluence/geometry.hpp"

namespace confluence {

/// Reported for metrics with nothing to average (no ground truth in range).
inline constexpr double kUndefinedMetric = -1.0;

class EmptyGroundTruth : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GroundTruthBox {
    BoxCorners box;
    std::int64_t class_id = 0;
    std::int64_t image_id = 0;
    bool ignore = false;  // crowd region
    double area = 0.0;
    std::int64_t id = 0;

    static GroundTruthBox make(const BoxCorners& box, std::int64_t class_id, std::int64_t image_id, bool ignore = false,
                               std::optional<double> area = std::nullopt, std::int64_t id = 0) {
        return {box, class_id, image_id, ignore, area.value_or(box.area()), id};
    }
};

using DetectionsByImage = std::map<std::int64_t, std::vector<Detection>>;
using GroundTruthByImage = std::map<std::int64_t, std::vector<GroundTruthBox>>;

/// Closed area interval in squared pixels.
struct AreaRange {
    double lo = 0.0;
    double hi = 1e10;

    bool contains(double area) const noexcept { return area >= lo && area <= hi; }
};

inline constexpr AreaRange kAreaAll{0.0, 1e10};
inline constexpr AreaRange kAreaSmall{0.0, 32.0 * 32.0};
inline constexpr AreaRange kAreaMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kAreaLarge{96.0 * 96.0, 1e10};
inline constexpr std::array<AreaRange, 4> kAreaRanges{kAreaAll, kAreaSmall, kAreaMedium, kAreaLarge};
inline constexpr std::array<std::size_t, 3> kMaxDets{1, 10, 100};

inline constexpr std::size_t kNumIouThresholds = 10;
inline constexpr std::size_t kNumRecallLevels = 101;

namespace detail {

// Same arithmetic as numpy.linspace (start + i * step, exact endpoint), so
// threshold comparisons agree with the reference evaluator at boundaries.
template <std::size_t N>
std::array<double, N> linspace(double start, double stop) {
    std::array<double, N> out{};
    const double step = (stop - start) / static_cast<double>(N - 1);
    for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<double>(i) * step + start;
    out[N - 1] = stop;
    return out;
}

}  // namespace detail

/// 0.50, 0.55, ..., 0.95
inline const std::array<double, kNumIouThresholds>& iou_thresholds() {
    static const auto t = detail::linspace<kNumIouThresholds>(0.5, 0.95);
    return t;
}

/// 0.00, 0.01, ..., 1.00
inline const std::array<double, kNumRecallLevels>& recall_levels() {
    static const auto r = detail::linspace<kNumRecallLevels>(0.0, 1.0);
    return r;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Outcome for one detection at one IoU threshold.
struct MatchRecord {
    double score = 0.0;
    std::int64_t image_id = 0;
    std::size_t rank = 0;  // position within its image after score sorting
    std::uint64_t stable_id = 0;
    bool true_positive = false;
    bool ignored = false;  // matched a crowd region, or unmatched and outside the area range
};

struct ImageMatches {
    std::vector<MatchRecord> detections;  // score order
    std::size_t num_positives = 0;        // non-ignored ground truths
    std::size_t false_negatives = 0;
};

/// Records pooled across images for one class; input to AP/AR.
struct MatchSet {
    std::vector<MatchRecord> records;
    std::size_t num_positives = 0;

    void add(const ImageMatches& m) {
        records.insert(records.end(), m.detections.begin(), m.detections.end());
        num_positives += m.num_positives;
    }
};

namespace detail {

/// Overlap used for matching: IoU for regular ground truth, intersection
/// over detection area for crowd regions.
inline double match_overlap(const BoxCorners& det, const GroundTruthBox& gt) noexcept {
    if (!gt.ignore) return iou(det, gt.box);
    const double inter = intersection_area(det, gt.box);
    const double da = det.area();
    return da > 0.0 ? inter / da : 0.0;
}

inline std::vector<Detection> score_sorted(std::span<const Detection> dets, std::size_t max_dets) {
    std::vector<Detection> sorted(dets.begin(), dets.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.stable_id < b.stable_id;
    });
    if (sorted.size() > max_dets) sorted.resize(max_dets);
    return sorted;
}

/// Single-image, single-class evaluation across every IoU threshold; the
/// matching loop follows the reference COCO evaluator.
struct ImageClassEval {
    std::vector<Detection> dets;  // score order, truncated
    std::size_t num_positives = 0;
    std::array<std::vector<bool>, kNumIouThresholds> matched;
    std::array<std::vector<bool>, kNumIouThresholds> ignored;

    ImageClassEval(std::span<const Detection> raw_dets, std::span<const GroundTruthBox> raw_gts, AreaRange range,
                   std::size_t max_dets, std::span<const double> thresholds) {
        dets = score_sorted(raw_dets, max_dets);

        // Non-ignored ground truth first, original order preserved within each part.
        std::vector<GroundTruthBox> gts(raw_gts.begin(), raw_gts.end());
        std::vector<bool> gt_ignored;
        for (const auto& g : gts) gt_ignored.push_back(g.ignore || !range.contains(g.area));
        std::vector<std::size_t> order(gts.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return !gt_ignored[a] && gt_ignored[b]; });
        std::vector<GroundTruthBox> sorted_gts;
        std::vector<bool> sorted_ignored;
        for (auto i : order) {
            sorted_gts.push_back(gts[i]);
            sorted_ignored.push_back(gt_ignored[i]);
            if (!gt_ignored[i]) ++num_positives;
        }

        std::vector<std::vector<double>> overlaps(dets.size(), std::vector<double>(sorted_gts.size()));
        for (std::size_t d = 0; d < dets.size(); ++d) {
            for (std::size_t g = 0; g < sorted_gts.size(); ++g) overlaps[d][g] = match_overlap(dets[d].box, sorted_gts[g]);
        }

        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            std::vector<bool> gt_taken(sorted_gts.size(), false);
            matched[t].assign(dets.size(), false);
            ignored[t].assign(dets.size(), false);
            for (std::size_t d = 0; d < dets.size(); ++d) {
                double best = std::min(thresholds[t], 1.0 - 1e-10);
                std::optional<std::size_t> hit;
                for (std::size_t g = 0; g < sorted_gts.size(); ++g) {
                    if (gt_taken[g] && !sorted_gts[g].ignore) continue;
                    // Once matched to a real object, stop at the first ignored one.
                    if (hit && !sorted_ignored[*hit] && sorted_ignored[g]) break;
                    if (overlaps[d][g] < best) continue;
                    best = overlaps[d][g];
                    hit = g;
                }
                if (hit) {
                    matched[t][d] = true;
                    ignored[t][d] = sorted_ignored[*hit];
                    gt_taken[*hit] = true;
                } else {
                    ignored[t][d] = !range.contains(dets[d].box.area());
                }
            }
        }
    }

    ImageMatches matches(std::size_t t, std::size_t limit) const {
        ImageMatches out;
        out.num_positives = num_positives;
        std::size_t tp = 0;
        const std::size_t n = std::min(limit, dets.size());
        for (std::size_t d = 0; d < n; ++d) {
            MatchRecord r;
            r.score = dets[d].score;
            r.image_id = dets[d].image_id;
            r.rank = d;
            r.stable_id = dets[d].stable_id;
            r.true_positive = matched[t][d] && !ignored[t][d];
            r.ignored = ignored[t][d];
            if (r.true_positive) ++tp;
            out.detections.push_back(r);
        }
        out.false_negatives = num_positives - tp;
        return out;
    }
};

inline std::set<std::int64_t> class_ids(std::span<const Detection> dets, std::span<const GroundTruthBox> gts) {
    std::set<std::int64_t> ids;
    for (const auto& d : dets) ids.insert(d.class_id);
    for (const auto& g : gts) ids.insert(g.class_id);
    return ids;
}

template <typename T>
std::vector<T> of_class(std::span<const T> items, std::int64_t cls) {
    std::vector<T> out;
    for (const auto& x : items) {
        if (x.class_id == cls) out.push_back(x);
    }
    return out;
}

}  // namespace detail

/// Greedy score-order matching of one image's detections to same-class
/// ground truth at a single IoU threshold. Detections matched to crowd
/// regions, or unmatched and outside `range`, are flagged ignored.
inline ImageMatches match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                                     double iou_thresh, AreaRange range = kAreaAll,
                                     std::size_t max_dets = std::numeric_limits<std::size_t>::max()) {
    std::optional<std::int64_t> image;
    auto check = [&](std::int64_t id) {
        if (image && *image != id) {
            throw ContractViolation("match_detections: inputs mix image ids " + std::to_string(*image) + " and " +
                                    std::to_string(id));
        }
        image = id;
    };
    for (const auto& d : dets) check(d.image_id);
    for (const auto& g : gts) check(g.image_id);

    const std::array<double, 1> threshold{iou_thresh};
    ImageMatches out;
    for (const auto cls : detail::class_ids(dets, gts)) {
        const auto cd = detail::of_class(dets, cls);
        const auto cg = detail::of_class(gts, cls);
        const detail::ImageClassEval eval(cd, cg, range, max_dets, threshold);
        const auto part = eval.matches(0, max_dets);
        out.detections.insert(out.detections.end(), part.detections.begin(), part.detections.end());
        out.num_positives += part.num_positives;
        out.false_negatives += part.false_negatives;
    }
    std::stable_sort(out.detections.begin(), out.detections.end(),
                     [](const MatchRecord& a, const MatchRecord& b) { return a.score > b.score; });
    return out;
}

// ---------------------------------------------------------------------------
// Precision / recall
// ---------------------------------------------------------------------------

struct PRCurve {
    std::vector<MatchRecord> records;                       // pooled, score order
    std::vector<double> precision;                          // raw, one per record
    std::vector<double> recall;                             // one per record
    std::array<double, kNumRecallLevels> interpolated{};   // at recall_levels()
    double final_recall = 0.0;
};

/// Builds the interpolated 101-point precision curve. Requires at least one
/// non-ignored ground truth.
inline PRCurve precision_recall(const MatchSet& matches) {
    PRCurve curve;
    curve.records = matches.records;
    // Pooled order: score descending; ties keep image order then in-image rank.
    std::stable_sort(curve.records.begin(), curve.records.end(), [](const MatchRecord& a, const MatchRecord& b) {
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        return a.rank < b.rank;
    });
    std::stable_sort(curve.records.begin(), curve.records.end(),
                     [](const MatchRecord& a, const MatchRecord& b) { return a.score > b.score; });

    const double positives = static_cast<double>(matches.num_positives);
    double tp = 0.0;
    double fp = 0.0;
    for (const auto& r : curve.records) {
        if (!r.ignored) (r.true_positive ? tp : fp) += 1.0;
        curve.recall.push_back(tp / positives);
        curve.precision.push_back(tp / (fp + tp + std::numeric_limits<double>::epsilon()));
    }
    curve.final_recall = curve.records.empty() ? 0.0 : curve.recall.back();

    // Precision envelope: running max from the high-recall end.
    std::vector<double> envelope = curve.precision;
    for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);

    const auto& levels = recall_levels();
    for (std::size_t k = 0; k < kNumRecallLevels; ++k) {
        const auto it = std::lower_bound(curve.recall.begin(), curve.recall.end(), levels[k]);
        const auto idx = static_cast<std::size_t>(it - curve.recall.begin());
        curve.interpolated[k] = idx < envelope.size() ? envelope[idx] : 0.0;
    }
    return curve;
}

/// 101-point interpolated AP; kUndefinedMetric when there is no ground truth.
inline double average_precision(const MatchSet& matches) {
    if (matches.num_positives == 0) return kUndefinedMetric;
    const auto curve = precision_recall(matches);
    double sum = 0.0;
    for (double p : curve.interpolated) sum += p;
    return sum / static_cast<double>(kNumRecallLevels);
}

/// Mean over IoU thresholds of the fraction of ground truth recovered;
/// `per_threshold[t]` holds matches at iou_thresholds()[t].
inline double average_recall(std::span<const MatchSet> per_threshold) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& m : per_threshold) {
        if (m.num_positives == 0) continue;
        std::size_t tp = 0;
        for (const auto& r : m.records) tp += r.true_positive ? 1 : 0;
        sum += static_cast<double>(tp) / static_cast<double>(m.num_positives);
        ++count;
    }
    return count == 0 ? kUndefinedMetric : sum / static_cast<double>(count);
}

/// Single-class convenience: truncates each image to its top `max_dets`
/// detections, matches at every IoU threshold and averages recall.
inline double average_recall(const DetectionsByImage& dets, const GroundTruthByImage& gts, std::size_t max_dets) {
    std::set<std::int64_t> images;
    for (const auto& [id, _] : dets) images.insert(id);
    for (const auto& [id, _] : gts) images.insert(id);
    std::vector<MatchSet> per_threshold(kNumIouThresholds);
    for (const auto id : images) {
        const auto d = dets.contains(id) ? std::span<const Detection>(dets.at(id)) : std::span<const Detection>{};
        const auto g = gts.contains(id) ? std::span<const GroundTruthBox>(gts.at(id)) : std::span<const GroundTruthBox>{};
        for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
            per_threshold[t].add(match_detections(d, g, iou_thresholds()[t], kAreaAll, max_dets));
        }
    }
    return average_recall(per_threshold);
}

// ---------------------------------------------------------------------------
// COCO-style summary
// ---------------------------------------------------------------------------

struct EvalSummary {
    double ap = kUndefinedMetric;  // IoU 0.50:0.95, all areas, 100 dets
    double ap50 = kUndefinedMetric;
    double ap75 = kUndefinedMetric;
    double ap_small = kUndefinedMetric;
    double ap_medium = kUndefinedMetric;
    double ap_large = kUndefinedMetric;
    double ar1 = kUndefinedMetric;
    double ar10 = kUndefinedMetric;
    double ar100 = kUndefinedMetric;
    double ar_small = kUndefinedMetric;
    double ar_medium = kUndefinedMetric;
    double ar_large = kUndefinedMetric;

    /// Name/value pairs in the conventional 12-metric order.
    std::array<std::pair<std::string_view, double>, 12> metrics() const {
        return {{{"AP", ap},
                 {"AP50", ap50},
                 {"AP75", ap75},
                 {"AP_small", ap_small},
                 {"AP_medium", ap_medium},
                 {"AP_large", ap_large},
                 {"AR1", ar1},
                 {"AR10", ar10},
                 {"AR100", ar100},
                 {"AR_small", ar_small},
                 {"AR_medium", ar_medium},
                 {"AR_large", ar_large}}};
    }

    friend bool operator==(const EvalSummary&, const EvalSummary&) = default;
};

/// Evaluates detections against ground truth over every class, area range,
/// IoU threshold and detection cap, then averages like the COCO summary.
/// Throws EmptyGroundTruth when no image carries any ground truth.
inline EvalSummary coco_summary(const DetectionsByImage& dets, const GroundTruthByImage& gts) {
    std::size_t total_gt = 0;
    for (const auto& [_, g] : gts) total_gt += g.size();
    if (total_gt == 0) throw EmptyGroundTruth("ground truth contains no annotations");

    std::set<std::int64_t> images;
    std::set<std::int64_t> classes;
    for (const auto& [id, d] : dets) {
        images.insert(id);
        for (const auto& x : d) classes.insert(x.class_id);
    }
    for (const auto& [id, g] : gts) {
        images.insert(id);
        for (const auto& x : g) classes.insert(x.class_id);
    }

    const auto& thresholds = iou_thresholds();
    constexpr std::size_t kAreas = kAreaRanges.size();
    constexpr std::size_t kCaps = kMaxDets.size();
    // [area][cap][threshold] -> per-class values (undefined entries skipped when averaging)
    std::array<std::array<std::array<std::vector<double>, kNumIouThresholds>, kCaps>, kAreas> ap_values;
    std::array<std::array<std::array<std::vector<double>, kNumIouThresholds>, kCaps>, kAreas> ar_values;

    for (const auto cls : classes) {
        std::vector<std::pair<std::vector<Detection>, std::vector<GroundTruthBox>>> per_image;
        for (const auto id : images) {
            std::vector<Detection> cd;
            std::vector<GroundTruthBox> cg;
            if (auto it = dets.find(id); it != dets.end()) cd = detail::of_class<Detection>(it->second, cls);
            if (auto it = gts.find(id); it != gts.end()) cg = detail::of_class<GroundTruthBox>(it->second, cls);
            if (cd.empty() && cg.empty()) continue;
            per_image.emplace_back(std::move(cd), std::move(cg));
        }
        for (std::size_t a = 0; a < kAreas; ++a) {
            std::vector<detail::ImageClassEval> evals;
            evals.reserve(per_image.size());
            for (const auto& [cd, cg] : per_image) {
                evals.emplace_back(cd, cg, kAreaRanges[a], kMaxDets.back(), thresholds);
            }
            for (std::size_t m = 0; m < kCaps; ++m) {
                for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
                    MatchSet set;
                    for (const auto& e : evals) set.add(e.matches(t, kMaxDets[m]));
                    if (set.num_positives == 0) continue;
                    ap_values[a][m][t].push_back(average_precision(set));
                    const auto curve_recall = [&] {
                        std::size_t tp = 0;
                        for (const auto& r : set.records) tp += r.true_positive ? 1 : 0;
                        return static_cast<double>(tp) / static_cast<double>(set.num_positives);
                    }();
                    ar_values[a][m][t].push_back(curve_recall);
                }
            }
        }
    }

    auto mean_over = [](const auto& grid, std::size_t area, std::size_t cap, std::optional<std::size_t> t) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < kNumIouThresholds; ++i) {
            if (t && *t != i) continue;
            for (double v : grid[area][cap][i]) {
                sum += v;
                ++count;
            }
        }
        return count == 0 ? kUndefinedMetric : sum / static_cast<double>(count);
    };

    constexpr std::size_t kAll = 0, kSmall = 1, kMedium = 2, kLarge = 3;
    constexpr std::size_t kCap1 = 0, kCap10 = 1, kCap100 = 2;
    EvalSummary s;
    s.ap = mean_over(ap_values, kAll, kCap100, std::nullopt);
    s.ap50 = mean_over(ap_values, kAll, kCap100, 0);
    s.ap75 = mean_over(ap_values, kAll, kCap100, 5);
    s.ap_small = mean_over(ap_values, kSmall, kCap100, std::nullopt);
    s.ap_medium = mean_over(ap_values, kMedium, kCap100, std::nullopt);
    s.ap_large = mean_over(ap_values, kLarge, kCap100, std::nullopt);
    s.ar1 = mean_over(ar_values, kAll, kCap1, std::nullopt);
    s.ar10 = mean_over(ar_values, kAll, kCap10, std::nullopt);
    s.ar100 = mean_over(ar_values, kAll, kCap100, std::nullopt);
    s.ar_small = mean_over(ar_values, kSmall, kCap100, std::nullopt);
    s.ar_medium = mean_over(ar_values, kMedium, kCap100, std::nullopt);
    s.ar_large = mean_over(ar_values, kLarge, kCap100, std::nullopt);
    return s;
}

}  // namespace confluence
