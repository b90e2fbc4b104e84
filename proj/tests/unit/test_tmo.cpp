#include <doctest.h>

#include "hdrsynth/tmo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

using namespace hdrsynth;

namespace {

Image random_hdr(int w, int h, uint32_t seed, float lo = 0.0f, float hi = 1.0f) {
    Image img(w, h, Gamut::BT2020, Transfer::PQ);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (float& v : img.data) v = dist(rng);
    return img;
}

Image gray_hdr(int w, int h, float code) {
    Image img(w, h, Gamut::BT2020, Transfer::PQ);
    for (float& v : img.data) v = code;
    return img;
}

// Independent reference chain: PQ decode, 2020->709, per-channel map,
// clamp, BT.709 encode.
Rgb lin709(const Rgb& pq) {
    return bt2020_to_bt709().apply({pq_eotf(pq[0]), pq_eotf(pq[1]), pq_eotf(pq[2])});
}

float encode(double v) {
    return static_cast<float>(gamma709_oetf(std::clamp(v, 0.0, 1.0)));
}

void check_pixelwise(const Image& got, const Image& h, const std::function<Rgb(const Rgb&)>& ref) {
    REQUIRE(got.width == h.width);
    REQUIRE(got.height == h.height);
    REQUIRE(got.gamut == Gamut::BT709);
    REQUIRE(got.transfer == Transfer::Gamma709);
    for (long i = 0; i < h.pixels(); ++i) {
        const float* p = h.data.data() + 3 * i;
        Rgb want = ref({p[0], p[1], p[2]});
        const float* q = got.data.data() + 3 * i;
        for (int c = 0; c < 3; ++c) {
            CAPTURE(i);
            REQUIRE(std::fabs(q[c] - want[c]) <= 1e-6);
        }
    }
}

} // namespace

TEST_SUITE("tmo") {

TEST_CASE("clip scales reference white to 1 and hard-clips") {
    Image h = random_hdr(9, 7, 101);
    check_pixelwise(tmo_clip(h), h, [](const Rgb& pq) {
        Rgb lin = lin709(pq);
        return Rgb{encode(lin[0] * 100.0), encode(lin[1] * 100.0), encode(lin[2] * 100.0)};
    });

    // 100 cd/m^2 gray (PQ ~0.508) maps to full white; brighter still 1.
    Image white = gray_hdr(2, 2, static_cast<float>(pq_oetf(0.01)));
    Image s = tmo_clip(white);
    for (float v : s.data) CHECK(v >= 0.9999f);
    Image brighter = gray_hdr(2, 2, 0.75f);
    for (float v : tmo_clip(brighter).data) CHECK(v == 1.0f);

    CHECK_THROWS_AS((void)tmo_clip(h, 0.0), std::runtime_error);
}

TEST_CASE("linear normalizer is a nearest-rank percentile of max-channel light") {
    // Gray pixels carry their linear level through the gamut matrix.
    std::vector<double> lin = {0.001, 0.002, 0.003, 0.004, 0.005,
                               0.006, 0.007, 0.008, 0.009, 0.010};
    Image h(5, 2, Gamut::BT2020, Transfer::PQ);
    for (int i = 0; i < 10; ++i) {
        float code = static_cast<float>(pq_oetf(lin[static_cast<size_t>(i)]));
        for (int c = 0; c < 3; ++c) h.data[static_cast<size_t>(3 * i + c)] = code;
    }
    // ceil(0.999*10) = 10th and ceil(0.5*10) = 5th order statistic.
    CHECK(linear_normalizer(h, 99.9) == doctest::Approx(0.010).epsilon(1e-4));
    CHECK(linear_normalizer(h, 50.0) == doctest::Approx(0.005).epsilon(1e-4));
    CHECK_THROWS_AS((void)linear_normalizer(h, 0.0), std::runtime_error);
    CHECK_THROWS_AS((void)linear_normalizer(h, 100.5), std::runtime_error);

    double norm = linear_normalizer(h, 99.9);
    check_pixelwise(tmo_linear(h), h, [norm](const Rgb& pq) {
        Rgb lin9 = lin709(pq);
        return Rgb{encode(lin9[0] / norm), encode(lin9[1] / norm), encode(lin9[2] / norm)};
    });
}

TEST_CASE("linear tmo returns black frames black") {
    Image black = gray_hdr(4, 4, 0.0f);
    Image s = tmo_linear(black);
    CHECK(s.gamut == Gamut::BT709);
    CHECK(s.transfer == Transfer::Gamma709);
    for (float v : s.data) CHECK(v == 0.0f);
}

TEST_CASE("reinhard compresses x/(1+x) on exposed light") {
    Image h = random_hdr(8, 6, 7);
    check_pixelwise(tmo_reinhard(h, 2.0), h, [](const Rgb& pq) {
        Rgb lin = lin709(pq);
        Rgb out;
        for (int c = 0; c < 3; ++c) {
            double x = std::max(0.0, lin[static_cast<size_t>(c)] * 2.0);
            out[static_cast<size_t>(c)] = encode(x / (1.0 + x));
        }
        return out;
    });
    // Higher exposure brightens.
    Image lo = tmo_reinhard(h, 1.0), hi = tmo_reinhard(h, 8.0);
    double sum_lo = 0, sum_hi = 0;
    for (size_t i = 0; i < lo.data.size(); ++i) {
        sum_lo += lo.data[i];
        sum_hi += hi.data[i];
    }
    CHECK(sum_hi > sum_lo);
}

TEST_CASE("hable filmic curve is white-normalized") {
    CHECK(hable_curve_value(11.2) == 1.0);
    CHECK(std::fabs(hable_curve_value(0.0)) < 1e-15);
    double prev = -1.0;
    for (int i = 0; i <= 60; ++i) {
        double v = hable_curve_value(i * 0.2);
        CHECK(v > prev);
        prev = v;
    }

    Image h = random_hdr(8, 6, 13);
    check_pixelwise(tmo_hable(h, 1.5), h, [](const Rgb& pq) {
        Rgb lin = lin709(pq);
        Rgb out;
        for (int c = 0; c < 3; ++c)
            out[static_cast<size_t>(c)] =
                encode(hable_curve_value(std::max(0.0, lin[static_cast<size_t>(c)] * 1.5)));
        return out;
    });
}

TEST_CASE("auto exposure targets 0.18 geometric-mean luminance") {
    // Constant gray: geometric mean is the single luminance value.
    Image h = gray_hdr(6, 6, 0.5f);
    double lum = pq_eotf(0.5f);
    CHECK(auto_exposure(h) == doctest::Approx(0.18 / lum).epsilon(1e-6));
    // Black frames hit the log floor instead of -inf.
    Image black = gray_hdr(4, 4, 0.0f);
    CHECK(auto_exposure(black) == doctest::Approx(0.18 / 1e-8).epsilon(1e-12));
    // The default exposure path matches the explicit value.
    Image a = tmo_reinhard(h);
    Image b = tmo_reinhard(h, auto_exposure(h));
    for (size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
}

TEST_CASE("mu-law cgm composes the two published maps") {
    Image h = random_hdr(7, 5, 29);
    check_pixelwise(tmo_mulaw_cgm(h), h, [](const Rgb& pq) {
        Rgb g = cgm_pixel(pq);
        return Rgb{mu_law(g[0]), mu_law(g[1]), mu_law(g[2])};
    });
    CHECK_THROWS_AS((void)tmo_mulaw_cgm(h, -1.0), std::runtime_error);
}

TEST_CASE("scene max linear scans every channel") {
    Image h = gray_hdr(4, 4, 0.1f);
    h.px(2, 3)[1] = 0.9f; // one bright green sample
    double got = scene_max_linear(h);
    // The 2020->709 matrix row for green peaks at 1.1329.
    CHECK(got == doctest::Approx(pq_eotf(0.9f) * 1.1328998971259602).epsilon(1e-5));
}

TEST_CASE("identity lut reproduces the pq codes as sdr codes") {
    Image h = random_hdr(6, 5, 37);
    Lut3D id = make_identity_lut(17);
    Image s = lut_apply(h, id);
    CHECK(s.transfer == Transfer::Gamma709);
    for (size_t i = 0; i < h.data.size(); ++i)
        REQUIRE(std::fabs(s.data[i] - h.data[i]) < 1e-6);

    Lut3D wide = make_identity_lut(4);
    wide.domain_max = {2.0, 1.0, 1.0};
    CHECK_THROWS_WITH_AS((void)lut_apply(h, wide), doctest::Contains("domain"),
                         std::runtime_error);
}

TEST_CASE("named dispatch routes options to the operators") {
    Image h = random_hdr(6, 4, 53);

    TmoOptions opt;
    opt.exposure = 2.0;
    Image a = apply_tmo("reinhard", h, opt);
    Image b = tmo_reinhard(h, 2.0);
    for (size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);

    TmoOptions clip_opt;
    clip_opt.clip_white = 0.05;
    Image c = apply_tmo("clip", h, clip_opt);
    Image d = tmo_clip(h, 0.05);
    for (size_t i = 0; i < c.data.size(); ++i) REQUIRE(c.data[i] == d.data[i]);

    Lut3D id = make_identity_lut(9);
    TmoOptions lut_opt;
    lut_opt.lut = &id;
    Image e = apply_tmo("lut", h, lut_opt);
    Image f = lut_apply(h, id);
    for (size_t i = 0; i < e.data.size(); ++i) REQUIRE(e.data[i] == f.data[i]);

    CHECK_THROWS_WITH_AS((void)apply_tmo("lut", h, {}), doctest::Contains("none supplied"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS((void)apply_tmo("drago", h, {}), doctest::Contains("unknown operator"),
                         std::runtime_error);
}

TEST_CASE("operators validate the input tags") {
    Image sdr(4, 4, Gamut::BT709, Transfer::Gamma709);
    CHECK_THROWS_WITH_AS((void)tmo_clip(sdr), doctest::Contains("expected bt2020+pq"),
                         std::runtime_error);
    CHECK_THROWS_AS((void)tmo_linear(sdr), std::runtime_error);
    CHECK_THROWS_AS((void)tmo_reinhard(sdr, 1.0), std::runtime_error);
    CHECK_THROWS_AS((void)tmo_hable(sdr, 1.0), std::runtime_error);
    CHECK_THROWS_AS((void)tmo_mulaw_cgm(sdr), std::runtime_error);
    Lut3D id = make_identity_lut(5);
    CHECK_THROWS_AS((void)lut_apply(sdr, id), std::runtime_error);
}

TEST_CASE("baked filmic lut tracks the direct operator") {
    // The filmic chain linearises PQ, so the top lattice cells cover ~25% of
    // linear light and the 709 gamut clip adds a crease; trilinear error on
    // uniform random codes is therefore a few percent at 33^3, not 1e-3.
    // Pin exactness on the lattice, the measured ceiling, and shrinkage with N.
    PixelCurve curve = hable_curve(1.0);
    Lut3D baked = bake_lut(curve, 33);
    std::mt19937 rng(71);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    auto worst_of = [&](const Lut3D& lut, int samples, uint32_t seed) {
        std::mt19937 r(seed);
        double worst = 0.0;
        for (int i = 0; i < samples; ++i) {
            Rgb in{dist(r), dist(r), dist(r)};
            Rgb d = curve(in);
            Rgb v = lut.sample(in);
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::fabs(d[c] - v[c]));
        }
        return worst;
    };

    // Lattice points reproduce the curve up to the f32 storage snap.
    for (int i = 0; i < 64; ++i) {
        int ri = rng() % 33, gi = rng() % 33, bi = rng() % 33;
        Rgb in{ri / 32.0, gi / 32.0, bi / 32.0};
        Rgb d = curve(in);
        Rgb v = baked.sample(in);
        for (int c = 0; c < 3; ++c) CHECK(std::fabs(d[c] - v[c]) < 1e-6);
    }

    // Dim pixels sit in fine-grained cells where the chain is nearly linear.
    double dim = 0.0;
    for (int i = 0; i < 2000; ++i) {
        Rgb in{0.4 * dist(rng), 0.4 * dist(rng), 0.4 * dist(rng)};
        Rgb d = curve(in);
        Rgb v = baked.sample(in);
        for (int c = 0; c < 3; ++c) dim = std::max(dim, std::fabs(d[c] - v[c]));
    }
    CHECK(dim < 2e-3);

    // Full-range error stays under the measured ceiling and shrinks with N.
    double e17 = worst_of(bake_lut(curve, 17), 4000, 901);
    double e33 = worst_of(baked, 4000, 901);
    double e65 = worst_of(bake_lut(curve, 65), 4000, 901);
    CHECK(e33 < 0.1);
    CHECK(e33 < e17);
    CHECK(e65 < e33);

    // The image path agrees with direct scalar sampling of the same lattice.
    Image h = random_hdr(16, 16, 71);
    Image via_lut = lut_apply(h, baked);
    Image direct = tmo_hable(h, 1.0);
    double img_worst = 0.0;
    for (size_t i = 0; i < direct.data.size(); ++i)
        img_worst =
            std::max(img_worst, std::fabs(static_cast<double>(via_lut.data[i]) - direct.data[i]));
    CHECK(img_worst < 0.1);
}

} // TEST_SUITE
