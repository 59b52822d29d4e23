#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "surfblc/surface.hpp"

using namespace surfblc;

namespace {

// Independent reference: scan all candidate heights ascending and take the
// first y with count(a <= y) * (K+1) >= N * (K+1-k), using exact integer
// comparisons on the counts.
std::vector<double> brute_force_blc(const std::vector<double>& pixels, std::size_t K) {
    std::vector<double> cand = pixels;
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    const std::uint64_t n = pixels.size();
    std::vector<double> out;
    for (std::size_t k = 1; k <= K; ++k) {
        for (double y : cand) {
            std::uint64_t count = 0;
            for (double a : pixels)
                if (a <= y) ++count;
            if (count * (K + 1) >= n * (K + 1 - k)) {
                out.push_back(y);
                break;
            }
        }
    }
    return out;
}

DepthProfile make_profile(std::size_t rows, std::size_t cols, std::vector<double> h) {
    DepthProfile p;
    p.rows = rows;
    p.cols = cols;
    p.heights = std::move(h);
    return p;
}

Blc linear_blc(std::size_t K, double at0, double slope) {
    std::vector<double> v(K);
    for (std::size_t i = 0; i < K; ++i) {
        const double x = double(i + 1) / double(K + 1);
        v[i] = at0 + slope * x;
    }
    return Blc(std::move(v));
}

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("blc of a constant profile repeats the constant") {
    const auto b = compute_blc(make_profile(2, 2, {5, 5, 5, 5}), 4);
    REQUIRE(b.k() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(b[i] == 5.0);
}

TEST_CASE("blc of [[0,1],[2,3]] at K=3 and shift by 10") {
    const auto b = compute_blc(make_profile(2, 2, {0, 1, 2, 3}), 3);
    CHECK(b.values == std::vector<double>{2, 1, 0});
    const auto c = compute_blc(make_profile(2, 2, {10, 11, 12, 13}), 3);
    CHECK(c.values == std::vector<double>{12, 11, 10});
}

TEST_CASE("blc matches the brute-force quantile scan exactly") {
    std::mt19937_64 rng(20240811);
    std::uniform_int_distribution<std::size_t> dim(1, 8), kk(1, 16);
    std::uniform_real_distribution<double> val(-5, 5);
    std::uniform_int_distribution<int> dup(0, 1);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t r = dim(rng), c = dim(rng), K = kk(rng);
        std::vector<double> h(r * c);
        for (double& x : h) x = val(rng);
        // duplicated heights stress the tie handling
        if (dup(rng) && h.size() > 1) h[0] = h[h.size() / 2];
        const auto got = compute_blc(make_profile(r, c, h), K);
        const auto want = brute_force_blc(h, K);
        REQUIRE(got.values.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("blc output is non-increasing and drawn from the input pixels") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> val(-3, 3);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> h(36);
        for (double& x : h) x = val(rng);
        const auto b = compute_blc(make_profile(6, 6, h), 17);
        for (std::size_t i = 1; i < b.k(); ++i) CHECK(b[i] <= b[i - 1]);
        for (std::size_t i = 0; i < b.k(); ++i)
            CHECK(std::count(h.begin(), h.end(), b[i]) > 0);
    }
}

TEST_CASE("blc shift and scale equivariance") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> val(-2, 2);
    for (int t = 0; t < 40; ++t) {
        std::vector<double> h(25);
        for (double& x : h) x = val(rng);
        const auto base = compute_blc(make_profile(5, 5, h), 13);

        std::vector<double> shifted = h, scaled = h;
        for (double& x : shifted) x += 3.25;
        for (double& x : scaled) x *= 2.5;
        const auto bs = compute_blc(make_profile(5, 5, shifted), 13);
        const auto bl = compute_blc(make_profile(5, 5, scaled), 13);
        for (std::size_t i = 0; i < base.k(); ++i) {
            CHECK(bs[i] == doctest::Approx(base[i] + 3.25).epsilon(1e-12));
            CHECK(bl[i] == doctest::Approx(base[i] * 2.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("blc input validation") {
    CHECK_THROWS_AS((void)compute_blc(make_profile(0, 0, {}), 4), InvalidInput);
    CHECK_THROWS_AS((void)compute_blc(make_profile(1, 2, {1.0, std::nan("")}), 4), InvalidInput);
    CHECK_THROWS_AS((void)compute_blc(make_profile(2, 2, {1, 2, 3, 4}), 0), InvalidInput);
    CHECK_THROWS_AS(Blc(std::vector<double>{1.0, 2.0}), InvalidInput);  // increasing
    CHECK_THROWS_AS(Blc(std::vector<double>{}), InvalidInput);
}

TEST_CASE("wasserstein1 basics and pseudometric properties") {
    CHECK(wasserstein1(Blc(std::vector<double>{1, 1}), Blc(std::vector<double>{1, 1})) == 0.0);
    CHECK(wasserstein1(Blc(std::vector<double>{2, 0}), Blc(std::vector<double>{0, 0})) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)wasserstein1(Blc(std::vector<double>{1.0}), Blc(std::vector<double>{1, 0})), InvalidInput);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> val(-1, 1);
    auto random_blc = [&](std::size_t K) {
        std::vector<double> v(K);
        for (double& x : v) x = val(rng);
        std::sort(v.rbegin(), v.rend());
        return Blc(std::move(v));
    };
    for (int t = 0; t < 60; ++t) {
        const auto a = random_blc(9), b = random_blc(9), c = random_blc(9);
        const double ab = wasserstein1(a, b), ba = wasserstein1(b, a);
        const double ac = wasserstein1(a, c), cb = wasserstein1(c, b);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(wasserstein1(a, a) == 0.0);
        CHECK(ab <= ac + cb + 1e-12);
    }
}

TEST_CASE("wasserstein1 shift invariance and scale equivariance") {
    const auto a = linear_blc(64, 1.0, -2.0), b = linear_blc(64, 0.6, -1.1);
    const double d = wasserstein1(a, b);
    std::vector<double> as = a.values, bs = b.values;
    for (double& x : as) x += 7;
    for (double& x : bs) x += 7;
    CHECK(wasserstein1(Blc(as), Blc(bs)) == doctest::Approx(d).epsilon(1e-12));
    as = a.values;
    bs = b.values;
    for (double& x : as) x *= 3;
    for (double& x : bs) x *= 3;
    CHECK(wasserstein1(Blc(as), Blc(bs)) == doctest::Approx(3 * d).epsilon(1e-12));
}

TEST_CASE("area quartiles of the staircase [3,2,1,0]") {
    const auto q = blc_area_quartiles(Blc(std::vector<double>{3, 2, 1, 0}));
    CHECK(q.q25 == doctest::Approx(2.75).epsilon(1e-12));
    CHECK(q.q50 == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(q.q75 == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("k-parameters of the line B(x) = 1 - 2x") {
    const std::size_t K = 512;
    const double tol = 4.0 / double(K);
    const auto b = linear_blc(K, 1.0, -2.0);
    const auto kp = extract_k_params(b);
    CHECK(kp.sk == doctest::Approx(2.0).epsilon(0).scale(0).epsilon(tol));
    CHECK(std::abs(kp.sk - 2.0) <= tol);
    CHECK(std::abs(kp.smr1 - 0.0) <= tol);
    CHECK(std::abs(kp.smr2 - 1.0) <= tol);
    CHECK(std::abs(kp.spk) <= tol);
    CHECK(std::abs(kp.svk) <= tol);
    const auto vp = extract_volume_params(b);
    CHECK(std::abs(vp.vmp - 0.01) <= tol);
    CHECK(std::abs(vp.vvv - 0.04) <= tol);
    CHECK(std::abs(vp.vmc - 0.63) <= tol);
    CHECK(std::abs(vp.vvc - 0.77) <= tol);
}

TEST_CASE("k-parameters of a constant curve degenerate cleanly") {
    const auto kp = extract_k_params(Blc(std::vector<double>(128, 2.5)));
    CHECK(kp.sk == 0.0);
    CHECK(kp.smr1 == 0.0);
    CHECK(kp.smr2 == 1.0);
    CHECK(kp.spk == 0.0);
    CHECK(kp.svk == 0.0);
}

TEST_CASE("k-parameters of a peak-then-line curve match the hand calculation") {
    // B(x) = 1 - 10x on [0, 0.1], then -(x - 0.1): flattest window has slope
    // -1, secant y = -(x - 0.1); Sk = 1, SMr1 = 0.09, Spk = 2*A1/SMr1 = 0.9.
    const std::size_t K = 2000;
    std::vector<double> v(K);
    for (std::size_t i = 0; i < K; ++i) {
        const double x = double(i + 1) / double(K + 1);
        v[i] = x <= 0.1 ? 1.0 - 10.0 * x : -(x - 0.1);
    }
    const auto kp = extract_k_params(Blc(std::move(v)));
    CHECK(std::abs(kp.sk - 1.0) <= 0.01);
    CHECK(std::abs(kp.smr1 - 0.09) <= 0.01);
    CHECK(std::abs(kp.spk - 0.9) <= 0.02);
    CHECK(std::abs(kp.smr2 - 1.0) <= 0.01);
    CHECK(std::abs(kp.svk) <= 0.02);
}

TEST_CASE("core-restricted window search also recovers the line parameters") {
    const auto kp = extract_k_params(linear_blc(512, 1.0, -2.0), SkSearch::CoreRestricted);
    CHECK(std::abs(kp.sk - 2.0) <= 4.0 / 512);
}

TEST_CASE("parameter scale/shift equivariance on random curves") {
    std::mt19937_64 rng(321);
    std::uniform_real_distribution<double> val(0, 3);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(64);
        for (double& x : v) x = val(rng);
        std::sort(v.rbegin(), v.rend());
        const Blc b(v);
        const auto kp = extract_k_params(b);
        const auto vp = extract_volume_params(b);
        CHECK(kp.smr1 >= 0.0);
        CHECK(kp.smr1 <= kp.smr2);
        CHECK(kp.smr2 <= 1.0);
        CHECK(kp.sk >= 0.0);
        CHECK(kp.spk >= 0.0);
        CHECK(kp.svk >= 0.0);

        const double lambda = 3.0;
        std::vector<double> w = v;
        for (double& x : w) x *= lambda;
        const Blc bs(w);
        const auto kps = extract_k_params(bs);
        const auto vps = extract_volume_params(bs);
        CHECK(kps.sk == doctest::Approx(lambda * kp.sk).epsilon(1e-9));
        CHECK(kps.spk == doctest::Approx(lambda * kp.spk).epsilon(1e-9).scale(1));
        CHECK(kps.svk == doctest::Approx(lambda * kp.svk).epsilon(1e-9).scale(1));
        CHECK(kps.smr1 == doctest::Approx(kp.smr1).epsilon(1e-9).scale(1));
        CHECK(kps.smr2 == doctest::Approx(kp.smr2).epsilon(1e-9).scale(1));
        CHECK(vps.vmp == doctest::Approx(lambda * vp.vmp).epsilon(1e-9).scale(1));
        CHECK(vps.vvv == doctest::Approx(lambda * vp.vvv).epsilon(1e-9).scale(1));
        CHECK(vps.vmc == doctest::Approx(lambda * vp.vmc).epsilon(1e-9).scale(1));
        CHECK(vps.vvc == doctest::Approx(lambda * vp.vvc).epsilon(1e-9).scale(1));
    }
}

TEST_CASE("volume params of the tripled line are tripled") {
    const auto v1 = extract_volume_params(linear_blc(512, 1.0, -2.0));
    const auto v3 = extract_volume_params(linear_blc(512, 3.0, -6.0));
    CHECK(v3.vmp == doctest::Approx(3 * v1.vmp).epsilon(1e-12));
    CHECK(v3.vvv == doctest::Approx(3 * v1.vvv).epsilon(1e-12));
    CHECK(v3.vmc == doctest::Approx(3 * v1.vmc).epsilon(1e-12));
    CHECK(v3.vvc == doctest::Approx(3 * v1.vvc).epsilon(1e-12));
}

TEST_CASE("parameter extraction rejects too-coarse curves") {
    CHECK_THROWS_AS((void)extract_k_params(Blc(std::vector<double>{3, 2, 1, 0})), InvalidInput);
    CHECK_THROWS_AS((void)extract_volume_params(Blc(std::vector<double>{3, 2, 1, 0})), InvalidInput);
}

TEST_CASE("htdp depth files round-trip") {
    const auto path = tmp_file("surfblc_test_depth.htdp");
    DepthProfile p = make_profile(3, 4, {});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> val(-10, 10);
    for (int i = 0; i < 12; ++i) p.heights.push_back(double(float(val(rng))));
    write_depth(path, p);
    const auto q = read_depth(path, 2.0);
    REQUIRE(q.rows == 3);
    REQUIRE(q.cols == 4);
    CHECK(q.pixel_pitch == 2.0);
    for (int i = 0; i < 12; ++i) CHECK(q.heights[i] == p.heights[i]);
    std::filesystem::remove(path);
}

TEST_CASE("htdp reader rejects junk and truncation") {
    const auto path = tmp_file("surfblc_test_bad.htdp");
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        std::fputs("not a depth file at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS((void)read_htdp(path), IoError);
    write_htdp(path, 2, 2, {1, 2, 3, 4});
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    CHECK_THROWS_AS((void)read_htdp(path), IoError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_htdp(path), IoError);
}

TEST_CASE("blc text files round-trip at full double precision") {
    const auto path = tmp_file("surfblc_test_curve.blc");
    const auto b = linear_blc(257, 1.0, -1.7320508075688772);
    write_blc_text(path, b);
    const auto c = read_blc_text(path);
    REQUIRE(c.k() == b.k());
    for (std::size_t i = 0; i < b.k(); ++i) CHECK(c[i] == b[i]);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_blc_text(path), IoError);
}
