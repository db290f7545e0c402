#pragma once

// Iterative radix-2 FFT with unitary (1/sqrt(N)) normalisation in both
// directions, so forward followed by inverse is the identity and Parseval
// holds without rescaling.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace rydcav::fft {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n);

/// In-place 1-D transform; `inverse` selects the +i sign convention.
void transform(std::span<Complex> data, bool inverse = false);

/// In-place 2-D transform of a row-major n x n array.
void transform_2d(std::span<Complex> data, std::size_t n, bool inverse = false);

/// Swap quadrants so the zero-frequency bin moves to (n/2, n/2).
void fftshift_2d(std::span<Complex> data, std::size_t n);
void ifftshift_2d(std::span<Complex> data, std::size_t n);

}  // namespace rydcav::fft
