#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "confluence/evaluation.hpp"
#include "confluence/suppression.hpp"

namespace confluence {

inline std::size_t default_jobs() noexcept { return std::max(1u, std::thread::hardware_concurrency()); }

/// Calls fn(i) for i in [0, count) on up to `jobs` threads. The first
/// exception thrown by any call is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        workers.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

using ResultsByImage = std::map<std::int64_t, SuppressionResult>;

/// Suppresses every image independently.
inline ResultsByImage suppress_all(const DetectionsByImage& dets, const SuppressionConfig& config,
                                   std::size_t jobs = default_jobs()) {
    config.validate();
    std::vector<std::pair<std::int64_t, const std::vector<Detection>*>> work;
    for (const auto& [id, d] : dets) work.emplace_back(id, &d);
    std::vector<SuppressionResult> results(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t i) { results[i] = suppress(*work[i].second, config); });

    ResultsByImage out;
    for (std::size_t i = 0; i < work.size(); ++i) out.emplace(work[i].first, std::move(results[i]));
    return out;
}

/// Kept detections re-scored with their final scores, ready for evaluation.
inline DetectionsByImage kept_detections(const ResultsByImage& results) {
    DetectionsByImage out;
    for (const auto& [id, r] : results) {
        auto& v = out[id];
        for (const auto& k : r.kept) {
            Detection d = k.detection;
            d.score = k.final_score;
            v.push_back(d);
        }
    }
    return out;
}

/// Sets the algorithm's own threshold: C_t for the Confluence family,
/// the IoU cutoff otherwise.
inline SuppressionConfig with_threshold(SuppressionConfig config, double threshold) {
    if (uses_proximity(config.algorithm)) {
        config.confluence_threshold = threshold;
    } else {
        config.iou_threshold = threshold;
    }
    return config;
}

struct SweepRow {
    double threshold = 0.0;
    EvalSummary summary;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double band_lo = 0.0;
    double band_hi = 0.0;
    /// max - min of AP over rows whose threshold lies in the band;
    /// kUndefinedMetric when the band holds no row.
    double stability = kUndefinedMetric;
};

/// Suppress-then-evaluate once per threshold. All configs are validated
/// before any work starts.
inline SweepReport threshold_sweep(const DetectionsByImage& dets, const GroundTruthByImage& gts,
                                   const SuppressionConfig& base, const std::vector<double>& thresholds,
                                   std::optional<std::pair<double, double>> band = std::nullopt,
                                   std::size_t jobs = default_jobs()) {
    for (double t : thresholds) with_threshold(base, t).validate();

    SweepReport report;
    for (double t : thresholds) {
        const auto results = suppress_all(dets, with_threshold(base, t), jobs);
        report.rows.push_back({t, coco_summary(kept_detections(results), gts)});
    }
    if (band) {
        std::tie(report.band_lo, report.band_hi) = *band;
    } else if (!thresholds.empty()) {
        report.band_lo = *std::min_element(thresholds.begin(), thresholds.end());
        report.band_hi = *std::max_element(thresholds.begin(), thresholds.end());
    }
    constexpr double kSlack = 1e-9;
    std::optional<double> lo, hi;
    for (const auto& row : report.rows) {
        if (row.threshold < report.band_lo - kSlack || row.threshold > report.band_hi + kSlack) continue;
        lo = std::min(lo.value_or(row.summary.ap), row.summary.ap);
        hi = std::max(hi.value_or(row.summary.ap), row.summary.ap);
    }
    if (lo) report.stability = *hi - *lo;
    return report;
}

/// Inclusive grid start, start+step, ..., stop (stop included when step
/// divides the range). Values are rounded to 1e-9 to shed accumulation noise.
inline std::vector<double> make_grid(double start, double stop, double step) {
    if (!(step > 0.0) || stop < start) throw ConfigError("grid needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>((stop - start) / step + 1e-9) + 1;
    std::vector<double> grid;
    grid.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        grid.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
    }
    return grid;
}

/// Default sweep grids: 0.1..1.5 for C_t, 0.1..0.9 for IoU thresholds.
inline std::vector<double> default_grid(Algorithm algorithm) {
    return uses_proximity(algorithm) ? make_grid(0.1, 1.5, 0.1) : make_grid(0.1, 0.9, 0.1);
}

}  // namespace confluence
