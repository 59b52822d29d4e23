#include "surfblc/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "surfblc/png_io.hpp"

namespace surfblc::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// band-limited random field from a fixed number of plane waves, unit-scaled
struct WaveField {
    struct Wave {
        double kx, ky, phase, amp;
    };
    std::vector<Wave> waves;

    WaveField(std::mt19937_64& rng, std::size_t n_waves, double min_wavelength,
              double max_wavelength) {
        std::uniform_real_distribution<double> uang(0, 2 * std::numbers::pi);
        std::uniform_real_distribution<double> ulog(std::log(min_wavelength),
                                                    std::log(max_wavelength));
        std::uniform_real_distribution<double> uamp(0.5, 1.0);
        for (std::size_t i = 0; i < n_waves; ++i) {
            double lambda = std::exp(ulog(rng));
            double dir = uang(rng);
            double k = 2 * std::numbers::pi / lambda;
            waves.push_back({k * std::cos(dir), k * std::sin(dir), uang(rng), uamp(rng)});
        }
        double var = 0;
        for (const auto& w : waves) var += 0.5 * w.amp * w.amp;
        double inv = 1.0 / std::sqrt(var);
        for (auto& w : waves) w.amp *= inv;
    }

    double operator()(double x, double y) const {
        double s = 0;
        for (const auto& w : waves) s += w.amp * std::cos(w.kx * x + w.ky * y + w.phase);
        return s;
    }
};

} // namespace

void SurfaceRecipe::validate() const {
    if (rows < 16 || cols < 16) throw ConfigError("surface recipe dimensions must be >= 16");
    if (wear < 0 || wear > 1) throw ConfigError("wear level must lie in [0,1]");
    if (pixel_pitch <= 0 || groove_spacing <= 0 || groove_depth <= 0 || plateau_scale <= 0)
        throw ConfigError("surface recipe scales must be positive");
}

DepthProfile generate_surface(const SurfaceRecipe& recipe) {
    recipe.validate();
    std::mt19937_64 rng(mix(recipe.seed, 0x5u));
    std::uniform_real_distribution<double> uphase(0, 1);

    const double pitch = recipe.pixel_pitch;
    WaveField plateau(rng, 48, 3.0 * pitch, 24.0 * pitch);
    const double phase1 = uphase(rng), phase2 = uphase(rng);

    const double a = recipe.groove_angle_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double groove_width = 0.07;  // fraction of the spacing

    DepthProfile p{recipe.rows, recipe.cols,
                   std::vector<double>(recipe.rows * recipe.cols), pitch};
    for (std::size_t r = 0; r < recipe.rows; ++r) {
        const double y = double(r) * pitch;
        for (std::size_t c = 0; c < recipe.cols; ++c) {
            const double x = double(c) * pitch;
            double h = recipe.plateau_scale * plateau(x, y);
            // cross-hatched groove families at +/- the honing angle
            for (int fam = 0; fam < 2; ++fam) {
                double t = (fam == 0 ? x * ca + y * sa : x * ca - y * sa) / recipe.groove_spacing +
                           (fam == 0 ? phase1 : phase2);
                double u = t - std::floor(t) - 0.5;
                h -= recipe.groove_depth * std::exp(-(u * u) / (2 * groove_width * groove_width));
            }
            p.at(r, c) = h;
        }
    }

    // wear: truncate everything above the (1 - 0.3 w) quantile
    if (recipe.wear > 0) {
        std::vector<double> sorted = p.heights;
        std::sort(sorted.begin(), sorted.end());
        double q = 1.0 - 0.3 * recipe.wear;
        std::size_t idx = std::min(std::size_t(q * double(sorted.size())), sorted.size() - 1);
        double cut = sorted[idx];
        for (double& h : p.heights) h = std::min(h, cut);
    }
    return p;
}

ReflectionImage render_reflection(const DepthProfile& depth, const SurfaceRecipe& recipe) {
    depth.validate();
    std::mt19937_64 rng(mix(recipe.seed, 0x1117u));

    const double pitch = depth.pixel_pitch;
    const std::size_t rows = depth.rows, cols = depth.cols;

    // smooth multiplicative illumination field (low frequency only)
    WaveField ill_field(rng, 6, 0.8 * double(cols) * pitch, 3.0 * double(cols) * pitch);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // directional light, normalized
    double lx = 0.35, ly = 0.25, lz = 0.90;
    const double ln = std::sqrt(lx * lx + ly * ly + lz * lz);
    lx /= ln;
    ly /= ln;
    lz /= ln;

    auto grad = [&](std::size_t r, std::size_t c, bool along_cols) {
        if (along_cols) {
            std::size_t c0 = c > 0 ? c - 1 : c, c1 = c + 1 < cols ? c + 1 : c;
            return (depth.at(r, c1) - depth.at(r, c0)) / (double(c1 - c0) * pitch);
        }
        std::size_t r0 = r > 0 ? r - 1 : r, r1 = r + 1 < rows ? r + 1 : r;
        return (depth.at(r1, c) - depth.at(r0, c)) / (double(r1 - r0) * pitch);
    };

    ReflectionImage img;
    img.rows = rows;
    img.cols = cols;
    img.pixels.resize(rows * cols * 3);
    const double albedo = 235.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double gx = grad(r, c, true), gy = grad(r, c, false);
            double nn = std::sqrt(gx * gx + gy * gy + 1.0);
            double shade = std::max(0.0, (-gx * lx - gy * ly + lz) / nn);
            double ill = 1.0 + recipe.light_gradient *
                                   ill_field(double(c) * pitch, double(r) * pitch);
            double v = albedo * shade * std::max(0.0, ill) + recipe.noise * gauss(rng);
            // metallic gray tint
            const double tint[3] = {0.95, 0.96, 1.0};
            for (std::size_t ch = 0; ch < 3; ++ch)
                img.at(r, c, ch) =
                    std::uint8_t(std::clamp(std::lround(v * tint[ch]), 0L, 255L));
        }
    }
    return img;
}

std::vector<SyntheticPair> generate_pairs(std::size_t n, std::size_t liners, std::uint64_t seed,
                                          const SurfaceRecipe& base) {
    if (n == 0) throw InvalidInput("dataset size must be positive");
    if (liners == 0 || liners > n) throw InvalidInput("liner count must lie in [1, n]");
    base.validate();

    struct LinerState {
        double wear, plateau, groove_depth, spacing, angle;
    };
    std::vector<LinerState> liner_states(liners);
    for (std::size_t l = 0; l < liners; ++l) {
        std::mt19937_64 rng(mix(seed, 0xA000 + l));
        std::uniform_real_distribution<double> u01(0, 1);
        LinerState s;
        s.wear = u01(rng);
        s.plateau = base.plateau_scale * (0.80 + 0.45 * u01(rng));
        s.groove_depth = base.groove_depth * (0.80 + 0.45 * u01(rng));
        s.spacing = base.groove_spacing * (0.85 + 0.35 * u01(rng));
        s.angle = base.groove_angle_deg + (u01(rng) - 0.5) * 10.0;
        liner_states[l] = s;
    }

    std::vector<SyntheticPair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = i % liners;
        const LinerState& s = liner_states[l];
        std::mt19937_64 rng(mix(seed, 0xB00000 + i));
        std::uniform_real_distribution<double> u01(0, 1);

        SurfaceRecipe r = base;
        r.plateau_scale = s.plateau * (0.95 + 0.10 * u01(rng));
        r.groove_depth = s.groove_depth * (0.95 + 0.10 * u01(rng));
        r.groove_spacing = s.spacing;
        r.groove_angle_deg = s.angle;
        r.wear = std::clamp(s.wear + (u01(rng) - 0.5) * 0.10, 0.0, 1.0);
        r.light_gradient = 0.20 + 0.30 * u01(rng);
        r.noise = 1.0 + 2.0 * u01(rng);
        r.seed = mix(seed, 0xC0000000 + i);

        SyntheticPair p;
        char buf[32];
        std::snprintf(buf, sizeof buf, "rec-%04zu", i);
        p.id = buf;
        std::snprintf(buf, sizeof buf, "liner-%03zu", l);
        p.liner_id = buf;
        p.segment = s.wear < 0.5 ? "3h" : "6h";
        p.operating_hours = 60000.0 * s.wear;
        p.recipe = r;
        p.depth = generate_surface(r);
        p.image = render_reflection(p.depth, r);
        p.image.source_id = p.id;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::filesystem::path generate_dataset(const std::filesystem::path& out_dir, std::size_t n,
                                       std::size_t liners, std::uint64_t seed, std::size_t k,
                                       const SurfaceRecipe& base) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("cannot create output directory: " + out_dir.string());

    auto pairs = generate_pairs(n, liners, seed, base);
    // the depth file stores binary32; quantize before labeling so a stored
    // BLC matches one recomputed from the stored depth bit for bit
    for (auto& p : pairs)
        for (double& h : p.depth.heights) h = double(float(h));
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& p : pairs) {
        const std::string rgb = p.id + ".png";
        const std::string dep = p.id + ".htdp";
        const std::string blc = p.id + ".blc";
        write_png(out_dir / rgb, p.image);
        write_depth(out_dir / dep, p.depth);
        write_blc_text(out_dir / blc, compute_blc(p.depth, k));
        manifest.push_back({{"id", p.id},
                            {"liner_id", p.liner_id},
                            {"segment", p.segment},
                            {"operating_hours", p.operating_hours},
                            {"rgb_path", rgb},
                            {"depth_path", dep},
                            {"blc_path", blc}});
    }
    const auto manifest_path = out_dir / "manifest.json";
    std::ofstream os(manifest_path);
    if (!os) throw IoError("cannot write manifest: " + manifest_path.string());
    os << manifest.dump(2) << '\n';
    return manifest_path;
}

} // namespace surfblc::synth
