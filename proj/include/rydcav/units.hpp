#pragma once

// Unit conventions shared by every module.
//
// Frequencies cross every public boundary as ordinary frequency in Hz (the
// number that follows "2pi x" in a lab notebook). Angular frequency is only
// used inside the dynamics code, converted through to_angular/from_angular.

#include <array>
#include <cmath>
#include <compare>
#include <numbers>

namespace rydcav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

struct FrequencyHz {
    double value = 0.0;

    constexpr FrequencyHz() = default;
    constexpr explicit FrequencyHz(double hz) : value(hz) {}

    constexpr auto operator<=>(const FrequencyHz&) const = default;

    constexpr FrequencyHz operator+(FrequencyHz o) const { return FrequencyHz{value + o.value}; }
    constexpr FrequencyHz operator-(FrequencyHz o) const { return FrequencyHz{value - o.value}; }
    constexpr FrequencyHz operator-() const { return FrequencyHz{-value}; }
    constexpr FrequencyHz operator*(double s) const { return FrequencyHz{value * s}; }
    constexpr FrequencyHz operator/(double s) const { return FrequencyHz{value / s}; }
    constexpr double operator/(FrequencyHz o) const { return value / o.value; }
};

constexpr FrequencyHz operator*(double s, FrequencyHz f) { return f * s; }

struct LengthMeters {
    double value = 0.0;

    constexpr LengthMeters() = default;
    constexpr explicit LengthMeters(double m) : value(m) {}

    constexpr auto operator<=>(const LengthMeters&) const = default;

    constexpr LengthMeters operator+(LengthMeters o) const { return LengthMeters{value + o.value}; }
    constexpr LengthMeters operator-(LengthMeters o) const { return LengthMeters{value - o.value}; }
    constexpr LengthMeters operator*(double s) const { return LengthMeters{value * s}; }
    constexpr LengthMeters operator/(double s) const { return LengthMeters{value / s}; }
    constexpr double operator/(LengthMeters o) const { return value / o.value; }
};

constexpr FrequencyHz hz(double v) { return FrequencyHz{v}; }
constexpr FrequencyHz khz(double v) { return FrequencyHz{v * 1e3}; }
constexpr FrequencyHz mhz(double v) { return FrequencyHz{v * 1e6}; }
constexpr FrequencyHz ghz(double v) { return FrequencyHz{v * 1e9}; }

constexpr LengthMeters meters(double v) { return LengthMeters{v}; }
constexpr LengthMeters mm(double v) { return LengthMeters{v * 1e-3}; }
constexpr LengthMeters um(double v) { return LengthMeters{v * 1e-6}; }
constexpr LengthMeters nm(double v) { return LengthMeters{v * 1e-9}; }

/// Angular frequency in rad/s.
double to_angular(FrequencyHz f);
FrequencyHz from_angular(double omega_rad_per_s);

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace rydcav
