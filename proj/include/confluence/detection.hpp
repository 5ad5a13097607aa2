#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "confluence/geometry.hpp"

namespace confluence {

inline constexpr std::string_view kVersion = "0.3.1";

/// Raised for invalid SuppressionConfig values; the CLI maps it to exit 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a caller breaks a documented precondition (mixed images, empty cluster).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Detection {
    BoxCorners box;
    double score = 0.0;
    std::int64_t class_id = 0;
    std::uint64_t stable_id = 0;
    std::int64_t image_id = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

enum class Algorithm { confluence, confluence_nms, greedy_nms, soft_nms };
enum class Decay { hard, linear, gaussian };

inline constexpr std::string_view to_string(Algorithm a) noexcept {
    switch (a) {
        case Algorithm::confluence: return "confluence";
        case Algorithm::confluence_nms: return "confluence_nms";
        case Algorithm::greedy_nms: return "greedy_nms";
        case Algorithm::soft_nms: return "soft_nms";
    }
    return "?";
}

inline constexpr std::string_view to_string(Decay d) noexcept {
    switch (d) {
        case Decay::hard: return "hard";
        case Decay::linear: return "linear";
        case Decay::gaussian: return "gaussian";
    }
    return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept {
    for (auto a : {Algorithm::confluence, Algorithm::confluence_nms, Algorithm::greedy_nms, Algorithm::soft_nms}) {
        if (name == to_string(a)) return a;
    }
    return std::nullopt;
}

inline std::optional<Decay> parse_decay(std::string_view name) noexcept {
    for (auto d : {Decay::hard, Decay::linear, Decay::gaussian}) {
        if (name == to_string(d)) return d;
    }
    return std::nullopt;
}

/// True for the two proximity-driven algorithms.
inline constexpr bool uses_proximity(Algorithm a) noexcept {
    return a == Algorithm::confluence || a == Algorithm::confluence_nms;
}

struct SuppressionConfig {
    Algorithm algorithm = Algorithm::confluence;
    double confluence_threshold = 0.7;
    double iou_threshold = 0.5;
    Decay decay = Decay::hard;
    double sigma = 0.5;
    double score_floor = 0.01;
    bool class_agnostic = false;
    bool record_audit = false;

    /// Throws ConfigError on the first violated constraint.
    void validate() const {
        if (!(confluence_threshold > 0.0 && confluence_threshold <= 2.0)) {
            throw ConfigError("confluence threshold must lie in (0, 2], got " + std::to_string(confluence_threshold));
        }
        if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
            throw ConfigError("iou threshold must lie in (0, 1), got " + std::to_string(iou_threshold));
        }
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw ConfigError("sigma must be positive, got " + std::to_string(sigma));
        }
        if (!(score_floor >= 0.0 && score_floor < 1.0)) {
            throw ConfigError("score floor must lie in [0, 1), got " + std::to_string(score_floor));
        }
        if (algorithm == Algorithm::soft_nms && decay == Decay::hard) {
            throw ConfigError("soft_nms requires linear or gaussian decay (hard decay is greedy_nms)");
        }
        if (algorithm == Algorithm::greedy_nms && decay != Decay::hard) {
            throw ConfigError("greedy_nms only supports hard decay (use soft_nms for score decay)");
        }
    }

    /// Crowd-scene setting: C_t = 0.5.
    static SuppressionConfig crowd_preset() {
        SuppressionConfig c;
        c.confluence_threshold = 0.5;
        c.class_agnostic = true;
        return c;
    }
};

}  // namespace confluence
