#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <stdexcept>
#include <string>
#include <utility>

namespace confluence {

/// A point in image coordinates; y grows downward.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Point2() = default;
    Point2(double x_, double y_) : x(x_), y(y_) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw std::invalid_argument("Point2: coordinates must be finite");
        }
    }

    friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned box stored as its upper-left and lower-right corners.
///
/// Zero-width or zero-height boxes are representable; `degenerate()` flags
/// them so the ingestion layer can decide what to do.
class BoxCorners {
public:
    constexpr BoxCorners() = default;

    BoxCorners(Point2 upper_left, Point2 lower_right)
        : upper_left_(upper_left), lower_right_(lower_right) {
        if (upper_left_.x > lower_right_.x || upper_left_.y > lower_right_.y) {
            throw std::invalid_argument("BoxCorners: upper-left corner must not exceed lower-right corner");
        }
    }

    BoxCorners(double x1, double y1, double x2, double y2)
        : BoxCorners(Point2{x1, y1}, Point2{x2, y2}) {}

    /// COCO `[x, y, width, height]` to corners.
    static BoxCorners from_xywh(double x, double y, double w, double h) {
        return BoxCorners{x, y, x + w, y + h};
    }

    const Point2& upper_left() const noexcept { return upper_left_; }
    const Point2& lower_right() const noexcept { return lower_right_; }

    double x1() const noexcept { return upper_left_.x; }
    double y1() const noexcept { return upper_left_.y; }
    double x2() const noexcept { return lower_right_.x; }
    double y2() const noexcept { return lower_right_.y; }

    double width() const noexcept { return x2() - x1(); }
    double height() const noexcept { return y2() - y1(); }
    double area() const noexcept { return width() * height(); }

    bool degenerate() const noexcept { return x1() == x2() || y1() == y2(); }

    std::array<double, 4> coords() const noexcept { return {x1(), y1(), x2(), y2()}; }

    friend bool operator==(const BoxCorners&, const BoxCorners&) = default;

    /// Lexicographic on (x1, y1, x2, y2); used as a tie-break key.
    friend std::partial_ordering operator<=>(const BoxCorners& a, const BoxCorners& b) noexcept {
        return a.coords() <=> b.coords();
    }

private:
    Point2 upper_left_{};
    Point2 lower_right_{};
};

inline double manhattan_distance(const Point2& a, const Point2& b) noexcept {
    return std::abs(b.x - a.x) + std::abs(b.y - a.y);
}

/// Sum of the Manhattan distances between corresponding corners.
inline double raw_proximity(const BoxCorners& bi, const BoxCorners& bj) noexcept {
    return manhattan_distance(bi.upper_left(), bj.upper_left()) +
           manhattan_distance(bi.lower_right(), bj.lower_right());
}

namespace detail {

struct AxisScale {
    double min = 0.0;
    double range = 0.0;

    // An axis where all four coordinates coincide collapses to 0.
    double operator()(double c) const noexcept { return range > 0.0 ? (c - min) / range : 0.0; }
};

inline AxisScale axis_scale(double a1, double a2, double b1, double b2) noexcept {
    const double lo = std::min({a1, a2, b1, b2});
    const double hi = std::max({a1, a2, b1, b2});
    return {lo, hi - lo};
}

}  // namespace detail

/// Rescales both boxes jointly so that, per axis, the smallest of the four
/// coordinates maps to 0 and the largest to 1.
inline std::pair<BoxCorners, BoxCorners> normalize_pair(const BoxCorners& bi, const BoxCorners& bj) {
    const auto sx = detail::axis_scale(bi.x1(), bi.x2(), bj.x1(), bj.x2());
    const auto sy = detail::axis_scale(bi.y1(), bi.y2(), bj.y1(), bj.y2());
    return {BoxCorners{sx(bi.x1()), sy(bi.y1()), sx(bi.x2()), sy(bi.y2())},
            BoxCorners{sx(bj.x1()), sy(bj.y1()), sx(bj.x2()), sy(bj.y2())}};
}

/// Corner proximity after joint normalization. Lies in [0, 4]; strictly
/// below 2 for boxes with positive overlap area.
///
/// Evaluated term by term in the same order as raw_proximity on the
/// normalized pair, so swapping the arguments is bit-identical.
inline double normalized_proximity(const BoxCorners& bi, const BoxCorners& bj) noexcept {
    const auto sx = detail::axis_scale(bi.x1(), bi.x2(), bj.x1(), bj.x2());
    const auto sy = detail::axis_scale(bi.y1(), bi.y2(), bj.y1(), bj.y2());
    const double upper = std::abs(sx(bj.x1()) - sx(bi.x1())) + std::abs(sy(bj.y1()) - sy(bi.y1()));
    const double lower = std::abs(sx(bj.x2()) - sx(bi.x2())) + std::abs(sy(bj.y2()) - sy(bi.y2()));
    return upper + lower;
}

inline double intersection_area(const BoxCorners& a, const BoxCorners& b) noexcept {
    const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Intersection over union; 0 when the union has no area.
inline double iou(const BoxCorners& a, const BoxCorners& b) noexcept {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

inline std::string to_string(const BoxCorners& b) {
    return "(" + std::to_string(b.x1()) + ", " + std::to_string(b.y1()) + ", " + std::to_string(b.x2()) +
           ", " + std::to_string(b.y2()) + ")";
}

}  // namespace confluence
