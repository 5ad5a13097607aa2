#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "confluence/detection.hpp"

namespace confluence {

struct SyntheticScene {
    std::size_t count = 1000;        // total detections
    std::size_t cluster_size = 10;   // detections per underlying object
    double image_size = 2000.0;
    double min_object = 20.0;
    double max_object = 160.0;
    double jitter = 0.06;            // corner noise as a fraction of object size
    std::int64_t classes = 1;
    std::int64_t image_id = 0;
};

/// Detector-like output: objects placed uniformly, each reported
/// `cluster_size` times with jittered corners and random scores.
/// Deterministic for a given seed on a given standard library.
inline std::vector<Detection> clustered_detections(const SyntheticScene& scene, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, scene.image_size);
    std::uniform_real_distribution<double> size(scene.min_object, scene.max_object);
    std::uniform_real_distribution<double> score(0.05, 1.0);
    std::uniform_int_distribution<std::int64_t> cls(0, std::max<std::int64_t>(scene.classes, 1) - 1);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<Detection> out;
    out.reserve(scene.count);
    const std::size_t per_object = std::max<std::size_t>(scene.cluster_size, 1);
    while (out.size() < scene.count) {
        const double cx = pos(rng), cy = pos(rng);
        const double w = size(rng), h = size(rng);
        const std::int64_t c = cls(rng);
        for (std::size_t k = 0; k < per_object && out.size() < scene.count; ++k) {
            const double sx = scene.jitter * w, sy = scene.jitter * h;
            double x1 = cx - w / 2 + sx * noise(rng), x2 = cx + w / 2 + sx * noise(rng);
            double y1 = cy - h / 2 + sy * noise(rng), y2 = cy + h / 2 + sy * noise(rng);
            if (x2 - x1 < 1.0) x2 = x1 + 1.0;
            if (y2 - y1 < 1.0) y2 = y1 + 1.0;
            out.push_back({BoxCorners{x1, y1, x2, y2}, score(rng), c, static_cast<std::uint64_t>(out.size()),
                           scene.image_id});
        }
    }
    return out;
}

}  // namespace confluence
