#pragma once

// Phase-only hologram synthesis for tweezer arrays by weighted
// Gerchberg-Saxton iteration. The far field is the unitary 2-D DFT of the
// unit-amplitude pupil field, stored with zero frequency at (n/2, n/2).

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace rydcav::holography {

struct PhaseMask {
    std::size_t n = 0;
    std::vector<double> phase;  // row-major, radians in [-pi, pi)
};

struct Spot {
    int row = 0;
    int col = 0;
    double weight = 1.0;  // relative target intensity
};

struct TargetPattern {
    std::vector<Spot> spots;

    /// rows x cols grid with `pitch` bins between spots, centred on
    /// (center_row, center_col) of the far-field grid.
    static TargetPattern grid(int rows, int cols, int pitch, int center_row, int center_col);
    /// Throws when spots fall outside an n x n grid, are closer than two bins,
    /// or carry non-positive weights.
    void validate(std::size_t n) const;
};

/// Far-field intensity |DFT(exp(i mask))|^2, zero frequency centred.
std::vector<double> propagate(const PhaseMask& mask);

/// 1 - (max - min) / (max + min). Throws on empty input or all zeros.
double uniformity(std::span<const double> intensities);

struct GsResult {
    PhaseMask mask;
    std::vector<double> spot_intensities;
    double uniformity = 0.0;
    double efficiency = 0.0;  // fraction of far-field power landing on spot bins
    /// Spot uniformity of the mask entering each iteration, then the final mask.
    std::vector<double> uniformity_history;
};

/// Weighted Gerchberg-Saxton from a uniformly random initial phase.
GsResult weighted_gs(const TargetPattern& target, int iterations, std::size_t grid_size,
                     std::uint64_t seed);

std::vector<double> spot_intensities(std::span<const double> far_field, std::size_t n,
                                     const TargetPattern& target);

/// Binary 16-bit PGM (P5, maxval 65535); phase mapped linearly from
/// [-pi, pi) onto [0, 65535].
void write_pgm16(std::ostream& os, const PhaseMask& mask);

}  // namespace rydcav::holography
