#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "surfblc/errors.hpp"

namespace surfblc {

/// A rectangular grid of surface heights in micrometers. Row-major storage.
struct DepthProfile {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> heights;      // rows * cols, row-major
    double pixel_pitch = 1.0;         // um per pixel, metadata only

    double at(std::size_t r, std::size_t c) const { return heights[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return heights[r * cols + c]; }
    std::size_t size() const { return rows * cols; }

    /// Throws InvalidInput if the profile is empty or contains non-finite heights.
    void validate() const;
};

/// Discretized bearing load curve: the reversed empirical quantile function
/// sampled at material ratios k/(K+1), k = 1..K. Always non-increasing.
struct Blc {
    std::vector<double> values;

    Blc() = default;
    explicit Blc(std::vector<double> v);  // validates monotonicity and finiteness

    std::size_t k() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Functional roughness indicators derived from the BLC core secant.
struct KParams {
    double sk = 0;     // core roughness depth (um)
    double spk = 0;    // reduced peak height (um)
    double svk = 0;    // reduced valley height (um)
    double smr1 = 0;   // upper core boundary material ratio, in [0,1]
    double smr2 = 1;   // lower core boundary material ratio, in [0,1]
};

/// Volume parameters per unit area. Heights in um give values numerically
/// equal to ml/m^2.
struct VolumeParams {
    double vmp = 0;    // peak material volume
    double vvv = 0;    // valley void volume
    double vmc = 0;    // core material volume
    double vvc = 0;    // core void volume
};

struct AreaQuartiles {
    double q25 = 0;
    double q50 = 0;
    double q75 = 0;
};

/// Which material-ratio starts the 40% core window search may use.
enum class SkSearch {
    FullSweep,       // starts in [0, 0.6] (ISO-style)
    CoreRestricted,  // starts in [0.2, 0.3]
};

/// B(A) sampled at k/(K+1). Every output entry is an observed pixel value.
Blc compute_blc(const DepthProfile& profile, std::size_t k);

/// Component-wise mean absolute difference of two equally sampled BLCs;
/// the Wasserstein-1 distance between the corresponding depth distributions.
double wasserstein1(const Blc& a, const Blc& b);

/// BLC height at material ratios 0.25 / 0.5 / 0.75, linearly interpolated.
AreaQuartiles blc_area_quartiles(const Blc& b);

/// Sk, Spk, Svk, SMr1, SMr2 from the flattest 40%-window secant.
KParams extract_k_params(const Blc& b, SkSearch search = SkSearch::FullSweep);

/// Vmp, Vvv, Vmc, Vvc from the material/void integrals at ratios 0.10 / 0.80.
VolumeParams extract_volume_params(const Blc& b);

// --- file formats -----------------------------------------------------------

// "HTDP" binary matrix: magic, u32 LE version (=1), u32 rows, u32 cols,
// rows*cols IEEE-754 binary32 LE, row-major.
struct HtdpMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

void write_htdp(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                const std::vector<double>& values);
HtdpMatrix read_htdp(const std::filesystem::path& path);

DepthProfile read_depth(const std::filesystem::path& path, double pixel_pitch = 1.0);
void write_depth(const std::filesystem::path& path, const DepthProfile& profile);

// BLC text file: one decimal value per line, K lines.
Blc read_blc_text(const std::filesystem::path& path);
void write_blc_text(const std::filesystem::path& path, const Blc& blc);

} // namespace surfblc
