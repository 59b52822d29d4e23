#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "surfblc/image.hpp"
#include "surfblc/png_io.hpp"

using namespace surfblc;

namespace {

ReflectionImage make_image(std::size_t rows, std::size_t cols) {
    ReflectionImage img;
    img.rows = rows;
    img.cols = cols;
    img.pixels.assign(rows * cols * 3, 0);
    return img;
}

ReflectionImage constant_image(std::size_t rows, std::size_t cols, std::uint8_t r,
                               std::uint8_t g, std::uint8_t b) {
    auto img = make_image(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        img.pixels[3 * i] = r;
        img.pixels[3 * i + 1] = g;
        img.pixels[3 * i + 2] = b;
    }
    return img;
}

ReflectionImage random_image(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    auto img = make_image(rows, cols);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> px(0, 255);
    for (auto& p : img.pixels) p = std::uint8_t(px(rng));
    return img;
}

} // namespace

TEST_CASE("grayscale uses the standard luminosity weights") {
    CHECK(to_grayscale(constant_image(16, 16, 255, 255, 255)).at(3, 5) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(to_grayscale(constant_image(16, 16, 0, 0, 0)).at(0, 0) == 0.0);
    CHECK(to_grayscale(constant_image(16, 16, 255, 0, 0)).at(8, 8) ==
          doctest::Approx(0.299).epsilon(1e-12));
    CHECK(to_grayscale(constant_image(16, 16, 0, 255, 0)).at(8, 8) ==
          doctest::Approx(0.587).epsilon(1e-12));
    CHECK(to_grayscale(constant_image(16, 16, 0, 0, 255)).at(8, 8) ==
          doctest::Approx(0.114).epsilon(1e-12));
}

TEST_CASE("high-pass gain hits its analytic values") {
    // at radius sigma the gain is 1 - exp(-1/2)
    CHECK(highpass_gain(8.0, 0.0, 8.0) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-13));
    CHECK(std::abs(highpass_gain(8.0, 0.0, 8.0) - (1.0 - std::exp(-0.5))) <= 1e-12);
    CHECK(highpass_gain(0.0, 0.0, 16.0) == 0.0);          // DC is removed exactly
    CHECK(highpass_gain(3.0, 4.0, 5.0) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-13));
    CHECK(highpass_gain(100.0, 100.0, 8.0) > 0.999999);   // far field passes through
    CHECK(highpass_gain(1.0, 1.0, 8.0) < 1.0);            // gain always below one
}

TEST_CASE("constant profiles vanish under every filter") {
    Matrix2d gray;
    gray.rows = 64;
    gray.cols = 48;
    gray.v.assign(64 * 48, 0.731);
    for (double sigma : {8.0, 16.0, 32.0, 64.0}) {
        const Matrix2d out = highpass_filter(gray, sigma);
        double peak = 0;
        for (double x : out.v) peak = std::max(peak, std::abs(x));
        CHECK(peak <= 1e-8);
    }
}

TEST_CASE("dft round-trips within 1e-10") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> val(-1, 1);
    Matrix2d m;
    m.rows = 31;  // odd x even stresses both frequency layouts
    m.cols = 20;
    m.v.resize(m.rows * m.cols);
    for (double& x : m.v) x = val(rng);
    const Matrix2d back = idft2_real(dft2(m), m.rows, m.cols);
    for (std::size_t i = 0; i < m.v.size(); ++i)
        CHECK(std::abs(back.v[i] - m.v[i]) <= 1e-10);
}

TEST_CASE("filtering is linear and removes the mean") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> val(0, 1);
    Matrix2d m;
    m.rows = 40;
    m.cols = 40;
    m.v.resize(1600);
    for (double& x : m.v) x = val(rng);
    const Matrix2d f = highpass_filter(m, 8.0);

    // adding a constant must not change the output (the DC bin carries it)
    Matrix2d shifted = m;
    for (double& x : shifted.v) x += 0.37;
    const Matrix2d fs = highpass_filter(shifted, 8.0);
    for (std::size_t i = 0; i < f.v.size(); ++i) CHECK(std::abs(fs.v[i] - f.v[i]) <= 1e-10);

    // larger sigma removes more low-frequency energy
    const Matrix2d f64 = highpass_filter(m, 64.0);
    double e8 = 0, e64 = 0;
    for (double x : f.v) e8 += x * x;
    for (double x : f64.v) e64 += x * x;
    CHECK(e64 <= e8 + 1e-12);
}

TEST_CASE("bilinear resize") {
    const auto img = random_image(24, 24, 3);
    SUBCASE("identity when target equals source") {
        const auto same = resize_bilinear(img, 24, 24);
        CHECK(same.pixels == img.pixels);
    }
    SUBCASE("2x2 to 2x3 interpolates the middle column") {
        auto small = make_image(2, 2);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            small.at(0, 0, ch) = 0;
            small.at(0, 1, ch) = 2;
            small.at(1, 0, ch) = 0;
            small.at(1, 1, ch) = 2;
        }
        // corner-aligned: middle column sits halfway between 0 and 2
        const auto up = resize_bilinear(small, 2, 3);
        CHECK(up.at(0, 0, 0) == 0);
        CHECK(up.at(0, 1, 0) == 1);
        CHECK(up.at(0, 2, 0) == 2);
    }
    SUBCASE("470x470 to 512x512 reports the right shape") {
        const auto big = resize_bilinear(random_image(470, 470, 9), 512, 512);
        CHECK(big.rows == 512);
        CHECK(big.cols == 512);
        CHECK(big.pixels.size() == 512 * 512 * 3);
    }
}

TEST_CASE("psi transform shape and monotone columns") {
    const auto stack = psi_transform(random_image(96, 96, 21), 64);
    CHECK(stack.k == 64);
    for (const auto& col : stack.curves) {
        REQUIRE(col.size() == 64);
        for (std::size_t i = 1; i < col.size(); ++i) CHECK(col[i] <= col[i - 1]);
    }
}

TEST_CASE("psi of a constant image is ~0 in all columns") {
    const auto stack = psi_transform(constant_image(64, 64, 180, 90, 45), 32);
    for (const auto& col : stack.curves)
        for (double v : col) CHECK(std::abs(v) <= 1e-8);
}

TEST_CASE("psi is invariant to a global brightness offset") {
    auto img = random_image(80, 80, 5);
    for (auto& p : img.pixels) p = std::uint8_t(40 + p % 150);  // leave headroom
    auto brighter = img;
    for (auto& p : brighter.pixels) p = std::uint8_t(p + 30);
    const auto a = psi_transform(img, 32);
    const auto b = psi_transform(brighter, 32);
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t i = 0; i < 32; ++i)
            CHECK(std::abs(a.curves[s][i] - b.curves[s][i]) <= 1e-6);
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS((void)psi_transform(make_image(8, 8), 32), InvalidInput);   // too small
    CHECK_THROWS_AS((void)psi_transform(random_image(32, 32, 1), 4), InvalidInput);  // k < 10
    ReflectionImage broken = random_image(16, 16, 2);
    broken.pixels.pop_back();
    CHECK_THROWS_AS(broken.validate(), InvalidInput);
}

TEST_CASE("png files round-trip losslessly") {
    const auto path = std::filesystem::temp_directory_path() / "surfblc_test_img.png";
    const auto img = random_image(37, 53, 77);
    write_png(path, img);
    const auto back = read_png(path);
    REQUIRE(back.rows == img.rows);
    REQUIRE(back.cols == img.cols);
    CHECK(back.pixels == img.pixels);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_png(path), IoError);
}
