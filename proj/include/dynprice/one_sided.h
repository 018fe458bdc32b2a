#pragma once

#include <algorithm>

namespace dynprice {

/// A value together with its directional derivative along one fixed
/// direction. Because `max`/`min` pick the branch with the larger (smaller)
/// derivative at ties, compositions of these operations give exact one-sided
/// derivatives of piecewise-smooth functions, kinks included.
struct Directional {
    double v = 0.0;
    double d = 0.0;

    constexpr Directional() = default;
    constexpr Directional(double value, double deriv = 0.0) : v(value), d(deriv) {}
};

constexpr Directional operator+(Directional a, Directional b) { return {a.v + b.v, a.d + b.d}; }
constexpr Directional operator-(Directional a, Directional b) { return {a.v - b.v, a.d - b.d}; }
constexpr Directional operator-(Directional a) { return {-a.v, -a.d}; }
constexpr Directional operator*(Directional a, Directional b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
constexpr Directional operator*(double k, Directional a) { return {k * a.v, k * a.d}; }
constexpr Directional operator*(Directional a, double k) { return {k * a.v, k * a.d}; }

inline Directional& operator+=(Directional& a, Directional b) {
    a = a + b;
    return a;
}
inline Directional& operator-=(Directional& a, Directional b) {
    a = a - b;
    return a;
}

inline Directional max(Directional a, Directional b) {
    if (a.v > b.v) return a;
    if (b.v > a.v) return b;
    return {a.v, std::max(a.d, b.d)};
}

inline Directional min(Directional a, Directional b) {
    if (a.v < b.v) return a;
    if (b.v < a.v) return b;
    return {a.v, std::min(a.d, b.d)};
}

inline Directional positive_part(Directional a) { return max(a, Directional{0.0}); }

inline Directional clamp(Directional a, double lo, double hi) { return min(max(a, Directional{lo}), Directional{hi}); }

}  // namespace dynprice
