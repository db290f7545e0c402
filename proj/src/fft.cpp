#include "rydcav/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace rydcav::fft {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void transform(std::span<Complex> data, bool inverse) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("FFT length must be a power of two");
    if (n == 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len >> 1;
        // twiddles computed directly rather than by recurrence to limit drift
        std::vector<Complex> tw(half);
        for (std::size_t k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t k = 0; k < half; ++k) {
                const Complex u = data[i + k];
                const Complex v = data[i + k + half] * tw[k];
                data[i + k] = u + v;
                data[i + k + half] = u - v;
            }
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& x : data) x *= norm;
}

void transform_2d(std::span<Complex> data, std::size_t n, bool inverse) {
    if (data.size() != n * n) throw std::invalid_argument("2-D FFT expects an n x n array");
    for (std::size_t r = 0; r < n; ++r) transform(data.subspan(r * n, n), inverse);
    std::vector<Complex> col(n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < n; ++r) col[r] = data[r * n + c];
        transform(col, inverse);
        for (std::size_t r = 0; r < n; ++r) data[r * n + c] = col[r];
    }
}

void fftshift_2d(std::span<Complex> data, std::size_t n) {
    if (n % 2 != 0) throw std::invalid_argument("fftshift_2d expects an even size");
    const std::size_t h = n / 2;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < n; ++c)
            std::swap(data[r * n + c], data[(r + h) * n + (c + h) % n]);
}

void ifftshift_2d(std::span<Complex> data, std::size_t n) { fftshift_2d(data, n); }

}  // namespace rydcav::fft
