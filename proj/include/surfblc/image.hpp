#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "surfblc/surface.hpp"

namespace surfblc {

/// 8-bit RGB reflection image, interleaved row-major storage.
struct ReflectionImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // rows * cols * 3
    std::string source_id;

    std::uint8_t at(std::size_t r, std::size_t c, std::size_t ch) const {
        return pixels[(r * cols + c) * 3 + ch];
    }
    std::uint8_t& at(std::size_t r, std::size_t c, std::size_t ch) {
        return pixels[(r * cols + c) * 3 + ch];
    }

    /// Throws InvalidInput unless both dimensions are >= 16 and storage matches.
    void validate() const;
};

/// Real-valued matrix, row-major.
struct Matrix2d {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
};

/// Grayscale profile with values in [0,1] (filtered outputs may leave that range).
using GrayProfile = Matrix2d;

/// BLCs of the four high-pass filtered grayscale profiles, sigma = 8,16,32,64.
struct FilteredBlcStack {
    static constexpr std::array<double, 4> sigmas{8.0, 16.0, 32.0, 64.0};
    std::size_t k = 0;
    std::array<std::vector<double>, 4> curves;  // each non-increasing, length k
};

/// Standard luminosity grayscale, scaled to [0,1].
GrayProfile to_grayscale(const ReflectionImage& img);

/// Gaussian high-pass gain at signed frequency offset (di, dj) from the center.
double highpass_gain(double di, double dj, double sigma);

/// DFT -> multiply by the centered Gaussian high-pass 1 - exp(-r^2 / (2 sigma^2))
/// -> inverse DFT, real part. The DC bin is annihilated exactly.
Matrix2d highpass_filter(const GrayProfile& gray, double sigma);

/// Channel-wise bilinear resize with corner alignment, clamped to [0,255].
ReflectionImage resize_bilinear(const ReflectionImage& img, std::size_t rows, std::size_t cols);

/// The transform Psi: grayscale -> four high-pass outputs -> BLC of each.
FilteredBlcStack psi_transform(const ReflectionImage& img, std::size_t k);

// Forward/inverse 2D DFT (FFTW-backed), exposed for verification. Output of
// dft2 is row-major with DC at (0,0); idft2_real applies the 1/(rows*cols)
// normalization and returns the real part.
std::vector<std::complex<double>> dft2(const Matrix2d& in);
Matrix2d idft2_real(const std::vector<std::complex<double>>& in, std::size_t rows,
                    std::size_t cols);

} // namespace surfblc
