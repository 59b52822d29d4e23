#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "surfblc/image.hpp"
#include "surfblc/surface.hpp"

namespace surfblc::synth {

/// Parametric description of a plateau-honed liner surface patch and its
/// rendering conditions.
struct SurfaceRecipe {
    std::size_t rows = 256;
    std::size_t cols = 256;
    double pixel_pitch = 7.5;        // um per pixel

    double groove_angle_deg = 25.0;  // cross-hatch half angle
    double groove_spacing = 90.0;    // um between grooves of one family
    double groove_depth = 2.8;       // um, depth scale of the groove notches
    double plateau_scale = 0.55;     // um, plateau texture amplitude
    double wear = 0.0;               // peak-truncation fraction, in [0,1]

    double light_gradient = 0.35;    // relative amplitude of the illumination field
    double noise = 2.0;              // Gaussian pixel noise, 8-bit units
    std::uint64_t seed = 0;

    void validate() const;
};

/// Cross-hatched groove structure plus a smooth plateau texture; wear
/// truncates all heights above the (1 - 0.3 w) quantile.
DepthProfile generate_surface(const SurfaceRecipe& recipe);

/// Lambertian shading of the depth gradients under a directional light,
/// modulated by a smooth illumination field, plus pixel noise.
ReflectionImage render_reflection(const DepthProfile& depth, const SurfaceRecipe& recipe);

struct SyntheticPair {
    std::string id;
    std::string liner_id;
    std::string segment;        // "3h" or "6h"
    double operating_hours = 0;
    SurfaceRecipe recipe;
    DepthProfile depth;
    ReflectionImage image;
};

/// In-memory dataset: n pairs over `liners` liner groups. Pair randomness
/// derives from (seed, index), so generation order never matters.
std::vector<SyntheticPair> generate_pairs(std::size_t n, std::size_t liners, std::uint64_t seed,
                                          const SurfaceRecipe& base = {});

/// Writes PNG images, HTDP depth files, K-line BLC files and manifest.json
/// into `out_dir`. Returns the manifest path.
std::filesystem::path generate_dataset(const std::filesystem::path& out_dir, std::size_t n,
                                       std::size_t liners, std::uint64_t seed, std::size_t k,
                                       const SurfaceRecipe& base = {});

} // namespace surfblc::synth
