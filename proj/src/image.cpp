#include "surfblc/image.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace surfblc {

void ReflectionImage::validate() const {
    if (rows < 16 || cols < 16) throw InvalidInput("reflection image must be at least 16x16");
    if (pixels.size() != rows * cols * 3)
        throw InvalidInput("reflection image storage does not match its dimensions");
}

GrayProfile to_grayscale(const ReflectionImage& img) {
    if (img.pixels.size() != img.rows * img.cols * 3)
        throw InvalidInput("reflection image storage does not match its dimensions");
    GrayProfile g{img.rows, img.cols, std::vector<double>(img.rows * img.cols)};
    for (std::size_t i = 0; i < img.rows * img.cols; ++i) {
        const std::uint8_t* p = &img.pixels[i * 3];
        g.v[i] = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    }
    return g;
}

double highpass_gain(double di, double dj, double sigma) {
    return 1.0 - std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
}

namespace {

// FFTW planning is not thread safe; execution of ready plans is.
std::mutex g_fftw_mutex;

void run_dft(const std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out,
             std::size_t rows, std::size_t cols, int sign) {
    out.resize(in.size());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftw_plan_dft_2d(int(rows), int(cols),
                                reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                                reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
}

// signed frequency offset of bin u in a length-n transform (0 at DC)
double freq_offset(std::size_t u, std::size_t n) {
    return (u <= (n - 1) / 2) ? double(u) : double(u) - double(n);
}

} // namespace

std::vector<std::complex<double>> dft2(const Matrix2d& in) {
    std::vector<std::complex<double>> cin(in.v.begin(), in.v.end());
    std::vector<std::complex<double>> out;
    run_dft(cin, out, in.rows, in.cols, FFTW_FORWARD);
    return out;
}

Matrix2d idft2_real(const std::vector<std::complex<double>>& in, std::size_t rows,
                    std::size_t cols) {
    std::vector<std::complex<double>> out;
    run_dft(in, out, rows, cols, FFTW_BACKWARD);
    Matrix2d m{rows, cols, std::vector<double>(rows * cols)};
    const double scale = 1.0 / double(rows * cols);
    for (std::size_t i = 0; i < out.size(); ++i) m.v[i] = out[i].real() * scale;
    return m;
}

Matrix2d highpass_filter(const GrayProfile& gray, double sigma) {
    if (sigma <= 0) throw InvalidInput("high-pass sigma must be positive");
    for (double x : gray.v)
        if (!std::isfinite(x)) throw InvalidInput("high-pass input contains non-finite values");

    auto spec = dft2(gray);
    for (std::size_t i = 0; i < gray.rows; ++i) {
        double di = freq_offset(i, gray.rows);
        for (std::size_t j = 0; j < gray.cols; ++j) {
            double dj = freq_offset(j, gray.cols);
            spec[i * gray.cols + j] *= highpass_gain(di, dj, sigma);
        }
    }
    return idft2_real(spec, gray.rows, gray.cols);
}

ReflectionImage resize_bilinear(const ReflectionImage& img, std::size_t rows, std::size_t cols) {
    if (rows < 2 || cols < 2) throw InvalidInput("resize target must be at least 2x2");
    if (img.rows < 2 || img.cols < 2 || img.pixels.size() != img.rows * img.cols * 3)
        throw InvalidInput("resize source must be a valid image of at least 2x2");
    if (rows == img.rows && cols == img.cols) return img;

    ReflectionImage out;
    out.rows = rows;
    out.cols = cols;
    out.source_id = img.source_id;
    out.pixels.resize(rows * cols * 3);

    const double sr = double(img.rows - 1) / double(rows - 1);
    const double sc = double(img.cols - 1) / double(cols - 1);
    for (std::size_t r = 0; r < rows; ++r) {
        double fr = double(r) * sr;
        std::size_t r0 = std::min(std::size_t(fr), img.rows - 2);
        double tr = fr - double(r0);
        for (std::size_t c = 0; c < cols; ++c) {
            double fc = double(c) * sc;
            std::size_t c0 = std::min(std::size_t(fc), img.cols - 2);
            double tc = fc - double(c0);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                double v = (1 - tr) * ((1 - tc) * img.at(r0, c0, ch) + tc * img.at(r0, c0 + 1, ch)) +
                           tr * ((1 - tc) * img.at(r0 + 1, c0, ch) + tc * img.at(r0 + 1, c0 + 1, ch));
                out.at(r, c, ch) = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

FilteredBlcStack psi_transform(const ReflectionImage& img, std::size_t k) {
    img.validate();
    if (k < 10) throw InvalidInput("psi transform needs K >= 10");

    GrayProfile gray = to_grayscale(img);
    FilteredBlcStack stack;
    stack.k = k;
    for (std::size_t s = 0; s < stack.sigmas.size(); ++s) {
        Matrix2d filtered = highpass_filter(gray, stack.sigmas[s]);
        DepthProfile as_profile{filtered.rows, filtered.cols, std::move(filtered.v), 1.0};
        stack.curves[s] = compute_blc(as_profile, k).values;
    }
    return stack;
}

} // namespace surfblc
