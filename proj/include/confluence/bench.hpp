#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "confluence/suppression.hpp"
#include "confluence/synthetic.hpp"

namespace confluence {

struct BenchRow {
    std::size_t n = 0;
    double median_seconds = 0.0;
    std::size_t kept = 0;
};

struct BenchReport {
    Algorithm algorithm = Algorithm::confluence;
    std::vector<BenchRow> rows;
    double exponent = 0.0;  // least-squares slope of log(time) on log(n)
};

/// Slope of the least-squares line through (log n, log t).
inline double scaling_exponent(const std::vector<BenchRow>& rows) {
    if (rows.size() < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (const auto& r : rows) {
        mx += std::log(static_cast<double>(r.n));
        my += std::log(r.median_seconds);
    }
    mx /= static_cast<double>(rows.size());
    my /= static_cast<double>(rows.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& r : rows) {
        const double dx = std::log(static_cast<double>(r.n)) - mx;
        sxy += dx * (std::log(r.median_seconds) - my);
        sxx += dx * dx;
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

/// Times `config.algorithm` on seeded synthetic scenes of each size. A
/// repetition re-runs the call until `min_sample` has elapsed and records
/// the mean per call, which keeps sub-millisecond sizes measurable.
inline BenchReport run_benchmark(const std::vector<std::size_t>& sizes, std::size_t repetitions,
                                 const SuppressionConfig& config, std::uint64_t seed,
                                 std::chrono::duration<double> min_sample = std::chrono::milliseconds(40)) {
    using clock = std::chrono::steady_clock;
    config.validate();
    BenchReport report;
    report.algorithm = config.algorithm;
    for (const auto n : sizes) {
        SyntheticScene scene;
        scene.count = n;
        const auto dets = clustered_detections(scene, seed);
        std::vector<double> samples;
        std::size_t kept = 0;
        for (std::size_t rep = 0; rep < std::max<std::size_t>(repetitions, 1); ++rep) {
            std::size_t calls = 0;
            const auto start = clock::now();
            auto elapsed = clock::duration::zero();
            do {
                kept = suppress(dets, config).kept.size();
                ++calls;
                elapsed = clock::now() - start;
            } while (elapsed < min_sample);
            samples.push_back(std::chrono::duration<double>(elapsed).count() / static_cast<double>(calls));
        }
        std::sort(samples.begin(), samples.end());
        const std::size_t mid = samples.size() / 2;
        const double median = samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
        report.rows.push_back({n, median, kept});
    }
    report.exponent = scaling_exponent(report.rows);
    return report;
}

}  // namespace confluence
