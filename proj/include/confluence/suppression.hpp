#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "confluence/detection.hpp"
#include "confluence/geometry.hpp"

namespace confluence {

/// Per-box bookkeeping for the Confluence pass: the thresholded neighbor
/// set, the sum of proximities to those neighbors, and the weighted
/// proximity P_w used for selection.
struct ClusterState {
    double proximity_sum = 0.0;
    std::vector<std::uint64_t> neighbors;  // stable ids, ascending
    double weighted_proximity = 0.0;

    bool lone() const noexcept { return neighbors.empty(); }
};

struct KeptDetection {
    Detection detection;
    double final_score = 0.0;

    friend bool operator==(const KeptDetection&, const KeptDetection&) = default;
};

/// One score change applied to `stable_id` because `selected_id` was retained.
struct DecayEvent {
    std::uint64_t stable_id = 0;
    std::uint64_t selected_id = 0;
    double before = 0.0;
    double after = 0.0;  // 0 when the box was removed outright
};

struct SuppressionResult {
    std::vector<KeptDetection> kept;
    std::size_t removed_count = 0;
    std::vector<DecayEvent> audit;  // filled only with SuppressionConfig::record_audit
};

// ---------------------------------------------------------------------------
// Scalar building blocks
// ---------------------------------------------------------------------------

/// Mean normalized proximity of `target` to each member of `cluster`.
inline double mean_proximity(const Detection& target, std::span<const Detection> cluster) {
    if (cluster.empty()) {
        throw ContractViolation("mean_proximity: cluster must not be empty (lone boxes take the sentinel path)");
    }
    double sum = 0.0;
    for (const auto& member : cluster) {
        if (member.stable_id == target.stable_id) {
            throw ContractViolation("mean_proximity: target must not be a member of its own cluster");
        }
        sum += normalized_proximity(target.box, member.box);
    }
    return sum / static_cast<double>(cluster.size());
}

inline double weighted_proximity(double mean_p, double score) noexcept { return mean_p * (1.0 - score); }

/// P_w assigned to a box with no neighbors below C_t. Always above any
/// clustered P_w (which is < C_t <= 2) and decreasing in score.
inline double lone_box_weight(double score) noexcept { return 2.0 + 2.0 * (1.0 - score); }

/// Score after suppression by a retained box.
///
/// For the Confluence family `proximity_or_overlap` is the normalized
/// proximity P (small = strong duplicate); for soft_nms it is the IoU.
/// Hard decay returns 0, meaning removal. Never exceeds `score`.
inline double decay_score(double score, double proximity_or_overlap, const SuppressionConfig& config) noexcept {
    if (config.decay == Decay::hard) return 0.0;
    const double v = proximity_or_overlap;
    if (uses_proximity(config.algorithm)) {
        if (config.decay == Decay::linear) {
            return std::clamp(score * (v / config.confluence_threshold), 0.0, score);
        }
        return std::clamp(score * (1.0 - std::exp(-(v * v) / config.sigma)), 0.0, score);
    }
    if (config.decay == Decay::linear) {
        return v > config.iou_threshold ? std::clamp(score * (1.0 - v), 0.0, score) : score;
    }
    return std::clamp(score * std::exp(-(v * v) / config.sigma), 0.0, score);
}

namespace detail {

inline bool dropped(double score, const SuppressionConfig& config) noexcept {
    return score <= 0.0 || score < config.score_floor;
}

/// Deterministic ordering used by every algorithm: higher score first, then
/// lexicographic coordinates, then stable id.
inline bool score_order(double score_a, const Detection& a, double score_b, const Detection& b) noexcept {
    if (score_a != score_b) return score_a > score_b;
    if (a.box != b.box) return (a.box <=> b.box) == std::partial_ordering::less;
    return a.stable_id < b.stable_id;
}

inline std::vector<Detection> canonical_order(std::span<const Detection> dets) {
    std::vector<Detection> sorted(dets.begin(), dets.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Detection& a, const Detection& b) { return score_order(a.score, a, b.score, b); });
    return sorted;
}

inline void require_single_image(std::span<const Detection> dets) {
    for (const auto& d : dets) {
        if (d.image_id != dets.front().image_id) {
            throw ContractViolation("suppression input mixes image ids " + std::to_string(dets.front().image_id) +
                                    " and " + std::to_string(d.image_id));
        }
    }
}

struct Neighbor {
    std::uint32_t index;
    double proximity;
};

/// Thresholded proximity graph over boxes already in canonical order.
/// Each pair is evaluated once; neighbor lists and sums come out in
/// ascending index order.
struct ProximityGraph {
    std::vector<std::vector<Neighbor>> neighbors;
    std::vector<double> sums;

    ProximityGraph(std::span<const Detection> dets, double threshold)
        : neighbors(dets.size()), sums(dets.size(), 0.0) {
        const std::size_t n = dets.size();
        std::vector<BoxCorners> boxes;
        boxes.reserve(n);
        for (const auto& d : dets) boxes.push_back(d.box);
        for (std::size_t i = 0; i < n; ++i) {
            const BoxCorners bi = boxes[i];
            for (std::size_t j = i + 1; j < n; ++j) {
                const double p = normalized_proximity(bi, boxes[j]);
                if (p < threshold) {
                    neighbors[i].push_back({static_cast<std::uint32_t>(j), p});
                    neighbors[j].push_back({static_cast<std::uint32_t>(i), p});
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (const auto& nb : neighbors[i]) s += nb.proximity;
            sums[i] = s;
        }
    }

    double mean(std::size_t i) const noexcept {
        return neighbors[i].empty() ? 0.0 : sums[i] / static_cast<double>(neighbors[i].size());
    }
};

/// Runs `algo` once per class (or once overall when class-agnostic) and
/// concatenates the results in ascending class order.
template <typename GroupFn>
SuppressionResult run_per_class(std::span<const Detection> dets, const SuppressionConfig& config, GroupFn&& algo) {
    config.validate();
    SuppressionResult result;
    if (dets.empty()) return result;
    require_single_image(dets);
    if (config.class_agnostic) {
        return algo(canonical_order(dets), config);
    }
    std::map<std::int64_t, std::vector<Detection>> by_class;
    for (const auto& d : dets) by_class[d.class_id].push_back(d);
    for (auto& [cls, group] : by_class) {
        auto part = algo(canonical_order(group), config);
        result.kept.insert(result.kept.end(), part.kept.begin(), part.kept.end());
        result.removed_count += part.removed_count;
        result.audit.insert(result.audit.end(), part.audit.begin(), part.audit.end());
    }
    return result;
}

inline SuppressionResult confluence_group(const std::vector<Detection>& dets, const SuppressionConfig& config) {
    const std::size_t n = dets.size();
    const ProximityGraph graph(dets, config.confluence_threshold);

    std::vector<double> score(n);
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        score[i] = dets[i].score;
        weight[i] = graph.neighbors[i].empty() ? lone_box_weight(score[i])
                                               : weighted_proximity(graph.mean(i), score[i]);
    }

    // Min-heap on (P_w, score desc, coords, stable id). Stale entries are
    // skipped by comparing against the per-box version counter.
    struct Entry {
        double weight;
        double score;
        std::uint32_t index;
        std::uint32_t version;
    };
    auto later = [&](const Entry& a, const Entry& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return score_order(b.score, dets[b.index], a.score, dets[a.index]);
    };
    std::vector<Entry> initial(n);
    for (std::size_t i = 0; i < n; ++i) initial[i] = {weight[i], score[i], static_cast<std::uint32_t>(i), 0};
    std::priority_queue<Entry, std::vector<Entry>, decltype(later)> pool(later, std::move(initial));

    enum class State : std::uint8_t { pooled, kept, removed };
    std::vector<State> state(n, State::pooled);
    std::vector<std::uint32_t> version(n, 0);

    SuppressionResult result;
    while (!pool.empty()) {
        const Entry top = pool.top();
        pool.pop();
        if (state[top.index] != State::pooled || top.version != version[top.index]) continue;
        const std::uint32_t m = top.index;
        state[m] = State::kept;
        result.kept.push_back({dets[m], score[m]});

        for (const auto& nb : graph.neighbors[m]) {
            const std::uint32_t j = nb.index;
            if (state[j] != State::pooled) continue;
            const double before = score[j];
            const double after = decay_score(before, nb.proximity, config);
            const bool gone = config.decay == Decay::hard || dropped(after, config);
            if (config.record_audit) {
                result.audit.push_back({dets[j].stable_id, dets[m].stable_id, before, gone ? 0.0 : after});
            }
            if (gone) {
                state[j] = State::removed;
                ++result.removed_count;
                continue;
            }
            score[j] = after;
            weight[j] = weighted_proximity(graph.mean(j), after);
            pool.push({weight[j], after, j, ++version[j]});
        }
    }
    return result;
}

/// Shared driver for the score-ordered algorithms (Confluence-NMS, Greedy-NMS,
/// Soft-NMS): retain the best remaining box, then decay or remove others
/// according to `affect(m, j)`, which returns the proximity/overlap value or
/// nullopt when box j is unaffected.
template <typename Affect>
SuppressionResult score_ordered_group(const std::vector<Detection>& dets, const SuppressionConfig& config,
                                      Affect&& affect) {
    const std::size_t n = dets.size();
    SuppressionResult result;

    if (config.decay == Decay::hard) {
        // Canonical order is already the selection order when scores never change.
        std::vector<bool> removed(n, false);
        for (std::size_t m = 0; m < n; ++m) {
            if (removed[m]) continue;
            result.kept.push_back({dets[m], dets[m].score});
            for (std::size_t j = m + 1; j < n; ++j) {
                if (removed[j] || !affect(m, j)) continue;
                removed[j] = true;
                ++result.removed_count;
                if (config.record_audit) result.audit.push_back({dets[j].stable_id, dets[m].stable_id, dets[j].score, 0.0});
            }
        }
        return result;
    }

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = dets[i].score;
    std::vector<std::uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0u);

    while (!pool.empty()) {
        auto best = std::min_element(pool.begin(), pool.end(), [&](std::uint32_t a, std::uint32_t b) {
            return score_order(score[a], dets[a], score[b], dets[b]);
        });
        const std::uint32_t m = *best;
        pool.erase(best);
        result.kept.push_back({dets[m], score[m]});

        std::size_t out = 0;
        for (const std::uint32_t j : pool) {
            const auto value = affect(m, j);
            if (value) {
                const double before = score[j];
                const double after = decay_score(before, *value, config);
                const bool gone = dropped(after, config);
                if (config.record_audit && after != before) {
                    result.audit.push_back({dets[j].stable_id, dets[m].stable_id, before, gone ? 0.0 : after});
                }
                if (gone) {
                    ++result.removed_count;
                    continue;
                }
                score[j] = after;
            }
            pool[out++] = j;
        }
        pool.resize(out);
    }
    return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

/// Per-box cluster state for one single-image group, in input order.
/// Ignores class boundaries; callers pass one class at a time.
inline std::vector<ClusterState> cluster_states(std::span<const Detection> dets, double confluence_threshold) {
    const auto sorted = detail::canonical_order(dets);
    const detail::ProximityGraph graph(sorted, confluence_threshold);
    std::map<std::uint64_t, std::size_t> position;
    for (std::size_t i = 0; i < sorted.size(); ++i) position[sorted[i].stable_id] = i;

    std::vector<ClusterState> states;
    states.reserve(dets.size());
    for (const auto& d : dets) {
        const std::size_t i = position.at(d.stable_id);
        ClusterState s;
        s.proximity_sum = graph.sums[i];
        for (const auto& nb : graph.neighbors[i]) s.neighbors.push_back(sorted[nb.index].stable_id);
        std::sort(s.neighbors.begin(), s.neighbors.end());
        s.weighted_proximity = s.lone() ? lone_box_weight(d.score) : weighted_proximity(graph.mean(i), d.score);
        states.push_back(std::move(s));
    }
    return states;
}

/// Retains, cluster by cluster, the box with the lowest confidence-weighted
/// mean proximity to its neighbors, then removes (hard) or decays its
/// neighbors. Decayed neighbors stay in the pool with P_w recomputed from
/// their cached mean proximity and new score.
inline SuppressionResult confluence(std::span<const Detection> dets, const SuppressionConfig& config) {
    return detail::run_per_class(dets, config, detail::confluence_group);
}

/// Score-ordered selection with normalized proximity (P < C_t) as the
/// duplicate test.
inline SuppressionResult confluence_nms(std::span<const Detection> dets, const SuppressionConfig& config) {
    return detail::run_per_class(dets, config, [](const std::vector<Detection>& group, const SuppressionConfig& cfg) {
        return detail::score_ordered_group(group, cfg, [&](std::size_t m, std::size_t j) -> std::optional<double> {
            const double p = normalized_proximity(group[m].box, group[j].box);
            if (p < cfg.confluence_threshold) return p;
            return std::nullopt;
        });
    });
}

inline SuppressionResult greedy_nms(std::span<const Detection> dets, const SuppressionConfig& config) {
    return detail::run_per_class(dets, config, [](const std::vector<Detection>& group, const SuppressionConfig& cfg) {
        return detail::score_ordered_group(group, cfg, [&](std::size_t m, std::size_t j) -> std::optional<double> {
            const double o = iou(group[m].box, group[j].box);
            if (o > cfg.iou_threshold) return o;
            return std::nullopt;
        });
    });
}

/// Soft-NMS: linear decay applies above the IoU threshold; Gaussian decay
/// applies to every remaining box.
inline SuppressionResult soft_nms(std::span<const Detection> dets, const SuppressionConfig& config) {
    return detail::run_per_class(dets, config, [](const std::vector<Detection>& group, const SuppressionConfig& cfg) {
        return detail::score_ordered_group(group, cfg, [&](std::size_t m, std::size_t j) -> std::optional<double> {
            const double o = iou(group[m].box, group[j].box);
            if (cfg.decay == Decay::linear && !(o > cfg.iou_threshold)) return std::nullopt;
            return o;
        });
    });
}

/// Dispatches on `config.algorithm`. Detections below the score floor or
/// with degenerate boxes are dropped up front and counted as removed.
inline SuppressionResult suppress(std::span<const Detection> dets, const SuppressionConfig& config) {
    config.validate();
    std::vector<Detection> eligible;
    eligible.reserve(dets.size());
    for (const auto& d : dets) {
        if (!d.box.degenerate() && !detail::dropped(d.score, config)) eligible.push_back(d);
    }
    SuppressionResult result;
    switch (config.algorithm) {
        case Algorithm::confluence: result = confluence(eligible, config); break;
        case Algorithm::confluence_nms: result = confluence_nms(eligible, config); break;
        case Algorithm::greedy_nms: result = greedy_nms(eligible, config); break;
        case Algorithm::soft_nms: result = soft_nms(eligible, config); break;
    }
    result.removed_count += dets.size() - eligible.size();
    return result;
}

}  // namespace confluence
