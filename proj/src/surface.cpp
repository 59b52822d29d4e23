#include "surfblc/surface.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little,
              "HTDP I/O assumes a little-endian host");

namespace surfblc {

void DepthProfile::validate() const {
    if (rows == 0 || cols == 0 || heights.size() != rows * cols)
        throw InvalidInput("depth profile is empty or inconsistently sized");
    for (double h : heights)
        if (!std::isfinite(h)) throw InvalidInput("depth profile contains non-finite heights");
}

Blc::Blc(std::vector<double> v) : values(std::move(v)) {
    if (values.empty()) throw InvalidInput("BLC must contain at least one sample");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw InvalidInput("BLC contains non-finite values");
        if (i > 0 && values[i] > values[i - 1])
            throw InvalidInput("BLC is not non-increasing");
    }
}

Blc compute_blc(const DepthProfile& profile, std::size_t k) {
    profile.validate();
    if (k == 0) throw InvalidInput("BLC sample count must be positive");

    std::vector<double> asc = profile.heights;
    std::sort(asc.begin(), asc.end());
    const std::uint64_t n = asc.size();

    // B(A, x) at x = k'/(K+1) is the smallest observed value y with
    // #{a <= y}/n >= 1 - x, i.e. the ascending order statistic at
    // ceil(n * (K+1-k') / (K+1)). Integer arithmetic keeps this exact.
    std::vector<double> out(k);
    for (std::uint64_t j = 1; j <= k; ++j) {
        std::uint64_t num = n * (k + 1 - j);
        std::uint64_t idx = (num + k) / (k + 1);  // ceil(num / (k+1)), >= 1
        out[j - 1] = asc[idx - 1];
    }
    return Blc(std::move(out));
}

double wasserstein1(const Blc& a, const Blc& b) {
    if (a.k() != b.k()) throw InvalidInput("Wasserstein-1 requires equally sampled BLCs");
    double s = 0;
    for (std::size_t i = 0; i < a.k(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.k());
}

namespace {

// Piecewise-linear view of a BLC over the material-ratio axis: samples sit
// at (i+1)/(K+1), the end segments extend linearly to ratios 0 and 1.
struct PlCurve {
    const std::vector<double>& b;
    double kp1;  // K + 1

    explicit PlCurve(const Blc& blc) : b(blc.values), kp1(double(blc.k() + 1)) {}

    double eval(double p) const {
        double t = p * kp1 - 1.0;  // real-valued sample index
        std::size_t n = b.size();
        if (n == 1) return b[0];
        double fi = std::clamp(std::floor(t), 0.0, double(n - 2));
        std::size_t i = std::size_t(fi);
        return b[i] + (t - fi) * (b[i + 1] - b[i]);
    }

    // exact integral of the piecewise-linear curve over [lo, hi]
    double integral(double lo, double hi) const {
        if (hi <= lo) return 0;
        double acc = 0;
        double prev = lo;
        long i0 = long(std::ceil(lo * kp1 - 1.0 + 1e-12));
        long i1 = long(std::floor(hi * kp1 - 1.0 - 1e-12));
        i0 = std::max(i0, 0L);
        i1 = std::min(i1, long(b.size()) - 1);
        for (long i = i0; i <= i1; ++i) {
            double x = (double(i) + 1.0) / kp1;
            if (x <= prev) continue;
            acc += 0.5 * (eval(prev) + b[std::size_t(i)]) * (x - prev);
            prev = x;
        }
        acc += 0.5 * (eval(prev) + eval(hi)) * (hi - prev);
        return acc;
    }

    // smallest ratio where the curve falls to the level L (curve assumed
    // non-increasing); 0 when it starts at or below L
    double first_at_or_below(double level) const {
        if (eval(0.0) <= level) return 0.0;
        double prev = 0.0;
        for (std::size_t i = 0; i <= b.size(); ++i) {
            double x = (i < b.size()) ? (double(i) + 1.0) / kp1 : 1.0;
            double hu = eval(prev), hv = eval(x);
            if (hu > level && hv <= level)
                return prev + (hu - level) / (hu - hv) * (x - prev);
            prev = x;
        }
        return 1.0;
    }

    // largest ratio where the curve is still >= the level L
    double last_at_or_above(double level) const {
        if (eval(1.0) >= level) return 1.0;
        double next = 1.0;
        for (long i = long(b.size()) - 1; i >= -1; --i) {
            double x = (i >= 0) ? (double(i) + 1.0) / kp1 : 0.0;
            double hu = eval(x), hv = eval(next);
            if (hu >= level && hv < level)
                return x + (hu - level) / (hu - hv) * (next - x);
            next = x;
        }
        return 0.0;
    }
};

void check_monotone(const Blc& b) {
    for (std::size_t i = 1; i < b.k(); ++i)
        if (b[i] > b[i - 1]) throw InvalidInput("BLC is not non-increasing");
}

} // namespace

AreaQuartiles blc_area_quartiles(const Blc& b) {
    if (b.k() < 2) throw InvalidInput("area quartiles need K >= 2");
    PlCurve c(b);
    return {c.eval(0.25), c.eval(0.50), c.eval(0.75)};
}

KParams extract_k_params(const Blc& b, SkSearch search) {
    const std::size_t K = b.k();
    if (K < 10) throw InvalidInput("K parameters need K >= 10");
    check_monotone(b);

    PlCurve c(b);
    const double kp1 = double(K + 1);

    // slide the 40%-wide window in one-sample steps, keep the flattest secant
    long j_lo = 0, j_hi = long(std::floor(0.6 * kp1 + 1e-9));
    if (search == SkSearch::CoreRestricted) {
        j_lo = long(std::ceil(0.2 * kp1 - 1e-9));
        j_hi = long(std::floor(0.3 * kp1 + 1e-9));
    }
    double best_slope = 0, best_s = 0;
    bool have = false;
    for (long j = j_lo; j <= j_hi; ++j) {
        double s = double(j) / kp1;
        double slope = (c.eval(s + 0.4) - c.eval(s)) / 0.4;
        if (!have || std::abs(slope) < std::abs(best_slope)) {
            best_slope = slope;
            best_s = s;
            have = true;
        }
    }

    // equivalent line through the window endpoints, extended to [0, 1]
    const double l0 = c.eval(best_s) - best_slope * best_s;
    const double l1 = c.eval(best_s) + best_slope * (1.0 - best_s);

    KParams p;
    p.sk = std::max(0.0, l0 - l1);
    p.smr1 = c.first_at_or_below(l0);
    p.smr2 = std::max(c.last_at_or_above(l1), p.smr1);
    if (p.smr1 > 0) {
        double a1 = c.integral(0, p.smr1) - l0 * p.smr1;
        p.spk = std::max(0.0, 2.0 * a1 / p.smr1);
    }
    if (p.smr2 < 1) {
        double a2 = l1 * (1.0 - p.smr2) - c.integral(p.smr2, 1);
        p.svk = std::max(0.0, 2.0 * a2 / (1.0 - p.smr2));
    }
    return p;
}

VolumeParams extract_volume_params(const Blc& b) {
    if (b.k() < 10) throw InvalidInput("volume parameters need K >= 10");
    PlCurve c(b);

    auto vm = [&](double p) { return c.integral(0, p) - c.eval(p) * p; };
    auto vv = [&](double p) { return c.eval(p) * (1.0 - p) - c.integral(p, 1); };

    VolumeParams v;
    v.vmp = std::max(0.0, vm(0.10));
    v.vvv = std::max(0.0, vv(0.80));
    v.vmc = std::max(0.0, vm(0.80) - vm(0.10));
    v.vvc = std::max(0.0, vv(0.10) - vv(0.80));
    return v;
}

// --- file formats -----------------------------------------------------------

namespace {

constexpr char kHtdpMagic[4] = {'H', 'T', 'D', 'P'};

void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

} // namespace

void write_htdp(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                const std::vector<double>& values) {
    if (values.size() != rows * cols) throw InvalidInput("HTDP dimensions do not match data");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(kHtdpMagic, 4);
    put_u32(os, 1);
    put_u32(os, std::uint32_t(rows));
    put_u32(os, std::uint32_t(cols));
    std::vector<float> f(values.begin(), values.end());
    os.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size() * 4));
    if (!os) throw IoError("write failed: " + path.string());
}

HtdpMatrix read_htdp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kHtdpMagic, 4) != 0)
        throw IoError("not an HTDP file: " + path.string());
    std::uint32_t version = get_u32(is);
    if (version != 1) throw IoError("unsupported HTDP version");
    HtdpMatrix m;
    m.rows = get_u32(is);
    m.cols = get_u32(is);
    std::vector<float> f(m.rows * m.cols);
    is.read(reinterpret_cast<char*>(f.data()), std::streamsize(f.size() * 4));
    if (!is) throw IoError("truncated HTDP file: " + path.string());
    m.values.assign(f.begin(), f.end());
    return m;
}

DepthProfile read_depth(const std::filesystem::path& path, double pixel_pitch) {
    HtdpMatrix m = read_htdp(path);
    DepthProfile p{m.rows, m.cols, std::move(m.values), pixel_pitch};
    p.validate();
    return p;
}

void write_depth(const std::filesystem::path& path, const DepthProfile& profile) {
    write_htdp(path, profile.rows, profile.cols, profile.heights);
}

Blc read_blc_text(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    std::vector<double> v;
    double x;
    while (is >> x) v.push_back(x);
    if (v.empty()) throw IoError("empty BLC file: " + path.string());
    return Blc(std::move(v));
}

void write_blc_text(const std::filesystem::path& path, const Blc& blc) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.precision(17);
    for (double v : blc.values) os << v << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace surfblc
