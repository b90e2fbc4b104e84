#include <doctest.h>

#include "hdrsynth/metrics.hpp"
#include "hdrsynth/tmo.hpp"

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

using namespace hdrsynth;

namespace {

constexpr double kPi = 3.14159265358979323846;

Image random_img(int w, int h, Gamut g, Transfer t, uint32_t seed) {
    Image img(w, h, g, t);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (float& v : img.data) v = dist(rng);
    return img;
}

Image add_noise(const Image& img, float amp, uint32_t seed) {
    Image out = img;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(-amp, amp);
    for (float& v : out.data) v = std::clamp(v + dist(rng), 0.0f, 1.0f);
    return out;
}

// Deterministic ramp-plus-texture scene: a radiance sweep from dim to
// ~1000 cd/m^2 with fine sinusoidal detail riding on it.
Image make_scene_hdr() {
    Image h(176, 176, Gamut::BT2020, Transfer::PQ);
    for (int y = 0; y < 176; ++y)
        for (int x = 0; x < 176; ++x) {
            double base = 0.05 + 0.7 * x / 175.0;
            double tex = 0.08 * std::sin(2.0 * kPi * x / 7.0) * std::cos(2.0 * kPi * y / 5.0);
            float code = static_cast<float>(std::clamp(base + tex, 0.0, 1.0));
            float* p = h.px(x, y);
            p[0] = 0.9f * code;
            p[1] = code;
            p[2] = 0.8f * code;
        }
    return h;
}

// ---- independent SSIM reference: direct 2-D window sums ----

const std::array<double, 11>& ref_taps() {
    static const std::array<double, 11> taps = [] {
        std::array<double, 11> g{};
        double s = 0.0;
        for (int i = 0; i < 11; ++i) {
            double d = i - 5;
            g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            s += g[static_cast<size_t>(i)];
        }
        for (double& v : g) v /= s;
        return g;
    }();
    return taps;
}

std::vector<double> ref_gauss2d(const std::vector<double>& p, int w, int h) {
    const auto& g = ref_taps();
    const int ow = w - 10, oh = h - 10;
    std::vector<double> out(static_cast<size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int j = 0; j < 11; ++j)
                for (int k = 0; k < 11; ++k)
                    acc += g[static_cast<size_t>(j)] * g[static_cast<size_t>(k)] *
                           p[static_cast<size_t>(y + j) * w + (x + k)];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

std::vector<double> ref_luma(const Image& img) {
    const bool wide = img.gamut == Gamut::BT2020;
    const double wr = wide ? 0.2627 : 0.2126;
    const double wg = wide ? 0.6780 : 0.7152;
    const double wb = wide ? 0.0593 : 0.0722;
    std::vector<double> out(static_cast<size_t>(img.pixels()));
    for (long i = 0; i < img.pixels(); ++i) {
        const float* p = img.data.data() + 3 * i;
        out[static_cast<size_t>(i)] = wr * p[0] + wg * p[1] + wb * p[2];
    }
    return out;
}

struct RefScale {
    double ssim = 0.0;
    double cs = 0.0;
};

RefScale ref_ssim_scale(const std::vector<double>& x, const std::vector<double>& y, int w,
                        int h) {
    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = ref_gauss2d(x, w, h), my = ref_gauss2d(y, w, h);
    const auto mxx = ref_gauss2d(xx, w, h), myy = ref_gauss2d(yy, w, h),
               mxy = ref_gauss2d(xy, w, h);
    RefScale r;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double s11 = mxx[i] - mx[i] * mx[i];
        const double s22 = myy[i] - my[i] * my[i];
        const double s12 = mxy[i] - mx[i] * my[i];
        const double cs = (2.0 * s12 + C2) / (s11 + s22 + C2);
        const double l = (2.0 * mx[i] * my[i] + C1) / (mx[i] * mx[i] + my[i] * my[i] + C1);
        r.ssim += l * cs;
        r.cs += cs;
    }
    r.ssim /= static_cast<double>(mx.size());
    r.cs /= static_cast<double>(mx.size());
    return r;
}

void ref_downsample2(std::vector<double>& p, int& w, int& h) {
    const int nw = w / 2, nh = h / 2;
    std::vector<double> q(static_cast<size_t>(nw) * nh);
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x) {
            const double* r0 = p.data() + static_cast<size_t>(2 * y) * w + 2 * x;
            const double* r1 = r0 + w;
            q[static_cast<size_t>(y) * nw + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
        }
    p = std::move(q);
    w = nw;
    h = nh;
}

double ref_ms_ssim(const Image& a, const Image& b) {
    constexpr std::array<double, 5> wts = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    std::vector<double> x = ref_luma(a), y = ref_luma(b);
    int w = a.width, h = a.height;
    double prod = 1.0;
    for (int sc = 0; sc < 5; ++sc) {
        RefScale st = ref_ssim_scale(x, y, w, h);
        const double term = (sc == 4) ? st.ssim : st.cs;
        prod *= std::pow(std::max(term, 0.0), wts[static_cast<size_t>(sc)]);
        if (sc < 4) {
            int w2 = w, h2 = h;
            ref_downsample2(x, w2, h2);
            ref_downsample2(y, w, h);
        }
    }
    return std::clamp(prod, 0.0, 1.0);
}

// CIEDE2000 verification pairs published by Sharma, Wu and Dalal (2005),
// including the hue-wraparound and near-achromatic discontinuity cases.
struct CiedeCase {
    double L1, a1, b1, L2, a2, b2, de;
};
constexpr CiedeCase kCiedeTable[] = {
    {50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425},
    {50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615},
    {50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412},
    {50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669},
    {50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461},
    {50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065},
    {50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492},
    {50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977},
    {50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030},
    {50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000},
    {60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644},
    {63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630},
    {61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731},
    {35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645},
    {22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373},
    {36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146},
    {90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441},
    {90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381},
    {6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377},
    {2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082},
};

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr caps at 99 and matches closed forms") {
    Image a = random_img(16, 12, Gamut::BT709, Transfer::Gamma709, 1);
    CHECK(psnr(a, a) == 99.0);

    // Exactly representable quarter-step offset: MSE 1/16, 10*log10(16) dB.
    Image c(8, 8, Gamut::BT709, Transfer::Gamma709);
    Image d = c;
    for (float& v : c.data) v = 0.25f;
    for (float& v : d.data) v = 0.5f;
    CHECK(psnr(c, d) == doctest::Approx(12.041199826559248).epsilon(1e-14));

    // Tiny differences saturate the cap.
    Image e = a;
    e.data[0] += 1e-6f;
    CHECK(psnr(a, e) == 99.0);

    // Random pair against an independent accumulation.
    Image b = random_img(16, 12, Gamut::BT709, Transfer::Gamma709, 2);
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double diff = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += diff * diff;
    }
    double want = 10.0 * std::log10(static_cast<double>(a.data.size()) / acc);
    CHECK(psnr(a, b) == doctest::Approx(want).epsilon(1e-13));

    Image wrong(8, 9, Gamut::BT709, Transfer::Gamma709);
    CHECK_THROWS_AS((void)psnr(a, wrong), std::invalid_argument);
}

TEST_CASE("mpsnr averages exposure-bracketed mse") {
    Image a = random_img(10, 8, Gamut::BT2020, Transfer::PQ, 3);
    CHECK(mpsnr(a, a) == 99.0);

    Image b = add_noise(a, 0.05f, 4);
    b.gamut = Gamut::BT2020;
    b.transfer = Transfer::PQ;

    // Independent chain: decode, expose by 2^stop, display-gamma, clip.
    auto ref = [&](const std::vector<double>& stops) {
        double total = 0.0;
        for (double stop : stops) {
            const double s = std::exp2(stop);
            double acc = 0.0;
            for (size_t i = 0; i < a.data.size(); ++i) {
                double ta = std::min(1.0, std::pow(pq_eotf(a.data[i]) * s, 1.0 / 2.2));
                double tb = std::min(1.0, std::pow(pq_eotf(b.data[i]) * s, 1.0 / 2.2));
                acc += (ta - tb) * (ta - tb);
            }
            total += acc / static_cast<double>(a.data.size());
        }
        double mse = total / static_cast<double>(stops.size());
        return std::min(99.0, 10.0 * std::log10(1.0 / mse));
    };
    CHECK(mpsnr(a, b) == doctest::Approx(ref({-2, -1, 0, 1, 2})).epsilon(1e-12));
    CHECK(mpsnr(a, b, {0.0}) == doctest::Approx(ref({0.0})).epsilon(1e-12));
    CHECK(mpsnr(a, b, {1.5}) == doctest::Approx(ref({1.5})).epsilon(1e-12));

    CHECK_THROWS_AS((void)mpsnr(a, b, {}), std::invalid_argument);
    Image sdr = random_img(10, 8, Gamut::BT709, Transfer::Gamma709, 5);
    CHECK_THROWS_AS((void)mpsnr(a, sdr), std::runtime_error);
}

TEST_CASE("ssim matches a direct windowed reference") {
    Image a = random_img(32, 30, Gamut::BT709, Transfer::Gamma709, 7);
    Image b = add_noise(a, 0.1f, 8);

    CHECK(ssim(a, a) == 1.0);
    CHECK(ssim(a, b) == ssim(b, a));

    RefScale want = ref_ssim_scale(ref_luma(a), ref_luma(b), 32, 30);
    CHECK(ssim(a, b) == doctest::Approx(std::clamp(want.ssim, 0.0, 1.0)).epsilon(1e-9));

    // The luma plane follows the gamut tag.
    Image a20 = a, b20 = b;
    a20.gamut = Gamut::BT2020;
    b20.gamut = Gamut::BT2020;
    RefScale want20 = ref_ssim_scale(ref_luma(a20), ref_luma(b20), 32, 30);
    CHECK(ssim(a20, b20) == doctest::Approx(std::clamp(want20.ssim, 0.0, 1.0)).epsilon(1e-9));
    CHECK(ssim(a20, b20) != ssim(a, b));

    // More noise, less similarity.
    CHECK(ssim(a, add_noise(a, 0.02f, 9)) > ssim(a, add_noise(a, 0.2f, 10)));

    Image tiny = random_img(10, 10, Gamut::BT709, Transfer::Gamma709, 11);
    CHECK_THROWS_AS((void)ssim(tiny, tiny), std::invalid_argument);
    CHECK_THROWS_AS((void)ssim(a, a20), std::invalid_argument);
    Image other = random_img(30, 32, Gamut::BT709, Transfer::Gamma709, 12);
    CHECK_THROWS_AS((void)ssim(a, other), std::invalid_argument);
}

TEST_CASE("ms-ssim matches a five-scale reference") {
    Image a = random_img(176, 180, Gamut::BT709, Transfer::Gamma709, 13);
    Image b = add_noise(a, 0.08f, 14);

    CHECK(ms_ssim(a, a) == 1.0);
    CHECK(ms_ssim(a, b) == ms_ssim(b, a));
    CHECK(ms_ssim(a, b) == doctest::Approx(ref_ms_ssim(a, b)).epsilon(1e-9));
    CHECK(ms_ssim(a, add_noise(a, 0.02f, 15)) > ms_ssim(a, add_noise(a, 0.25f, 16)));

    Image small = random_img(175, 176, Gamut::BT709, Transfer::Gamma709, 17);
    CHECK_THROWS_AS((void)ms_ssim(small, small), std::invalid_argument);
}

TEST_CASE("ciede2000 reproduces the published verification pairs") {
    for (const CiedeCase& t : kCiedeTable) {
        Lab c1{t.L1, t.a1, t.b1};
        Lab c2{t.L2, t.a2, t.b2};
        CAPTURE(t.L1);
        CAPTURE(t.a1);
        CAPTURE(t.b1);
        CHECK(std::fabs(ciede2000_lab(c1, c2) - t.de) <= 1e-4);
        // Symmetric in its arguments.
        CHECK(std::fabs(ciede2000_lab(c1, c2) - ciede2000_lab(c2, c1)) < 1e-12);
    }
    CHECK(ciede2000_lab({31.0, 12.0, -4.0}, {31.0, 12.0, -4.0}) == 0.0);
}

TEST_CASE("image ciede2000 is the mean per-pixel difference") {
    Image a = random_img(9, 7, Gamut::BT709, Transfer::Gamma709, 19);
    Image b = add_noise(a, 0.1f, 20);
    Planes pa = rgb_to_lab(a), pb = rgb_to_lab(b);
    double acc = 0.0;
    for (size_t i = 0; i < pa.a.size(); ++i)
        acc += ciede2000_lab({pa.a[i], pa.b[i], pa.c[i]}, {pb.a[i], pb.b[i], pb.c[i]});
    CHECK(ciede2000(a, b) == doctest::Approx(acc / static_cast<double>(pa.a.size()))
                                 .epsilon(1e-13));
    CHECK(ciede2000(a, a) == 0.0);
    Image hdr = random_img(9, 7, Gamut::BT2020, Transfer::PQ, 21);
    CHECK_THROWS_AS((void)ciede2000(hdr, hdr), std::runtime_error);
}

TEST_CASE("delta-e itp follows the BT.2124 chain") {
    Image a = random_img(8, 6, Gamut::BT2020, Transfer::PQ, 23);
    Image b = add_noise(a, 0.05f, 24);
    b.gamut = Gamut::BT2020;
    b.transfer = Transfer::PQ;

    CHECK(delta_e_itp(a, a) == 0.0);
    CHECK(delta_e_itp(a, b) == delta_e_itp(b, a));

    Planes pa = rgb_to_ictcp(a), pb = rgb_to_ictcp(b);
    double acc = 0.0;
    for (size_t i = 0; i < pa.a.size(); ++i) {
        double di = pa.a[i] - pb.a[i];
        double dt = 0.5 * (pa.b[i] - pb.b[i]); // T = Ct/2
        double dp = pa.c[i] - pb.c[i];
        acc += 720.0 * std::sqrt(di * di + dt * dt + dp * dp);
    }
    CHECK(delta_e_itp(a, b) ==
          doctest::Approx(acc / static_cast<double>(pa.a.size())).epsilon(1e-13));

    // Achromatic pairs reduce to 720*|dI|.
    Image g1(4, 4, Gamut::BT2020, Transfer::PQ), g2(4, 4, Gamut::BT2020, Transfer::PQ);
    for (float& v : g1.data) v = 0.3f;
    for (float& v : g2.data) v = 0.35f;
    Ictcp i1 = pq2020_to_ictcp({0.3f, 0.3f, 0.3f});
    Ictcp i2 = pq2020_to_ictcp({0.35f, 0.35f, 0.35f});
    CHECK(delta_e_itp(g1, g2) ==
          doctest::Approx(720.0 * std::fabs(i1.i - i2.i)).epsilon(1e-9));

    Image sdr = random_img(8, 6, Gamut::BT709, Transfer::Gamma709, 25);
    CHECK_THROWS_AS((void)delta_e_itp(a, sdr), std::runtime_error);
}

TEST_CASE("tmqi regression values are stable") {
    Image h = make_scene_hdr();
    TmqiResult hable = tmqi(h, tmo_hable(h));
    TmqiResult clip = tmqi(h, tmo_clip(h));

    // Frozen outputs for the fixed ramp scene.
    CHECK(hable.q == doctest::Approx(0.92664541016295576).epsilon(1e-9));
    CHECK(hable.s == doctest::Approx(0.96727102712396618).epsilon(1e-9));
    CHECK(hable.n == doctest::Approx(0.57033961975378233).epsilon(1e-9));
    CHECK(clip.q == doctest::Approx(0.94884109973721142).epsilon(1e-9));
    CHECK(clip.s == doctest::Approx(0.92107621673903661).epsilon(1e-9));
    CHECK(clip.n == doctest::Approx(0.7849989169059628).epsilon(1e-9));

    // Hard clipping erases highlight texture: structurally worse than the
    // filmic curve on this scene (naturalness can still disagree).
    CHECK(hable.s > clip.s);

    for (const TmqiResult& r : {hable, clip}) {
        CHECK(r.q >= 0.0);
        CHECK(r.q <= 1.0);
        CHECK(r.s >= 0.0);
        CHECK(r.s <= 1.0);
        CHECK(r.n >= 0.0);
        CHECK(r.n <= 1.0);
    }

    // A flat SDR frame has zero block contrast: the naturalness prior
    // vanishes and structure nearly does.
    Image flat(176, 176, Gamut::BT709, Transfer::Gamma709);
    for (float& v : flat.data) v = 0.5f;
    TmqiResult f = tmqi(h, flat);
    CHECK(f.n == 0.0);
    CHECK(f.s < 0.2);
    CHECK(f.q < clip.q);
}

TEST_CASE("tmqi validates tags and size") {
    Image h = make_scene_hdr();
    Image s = tmo_clip(h);
    CHECK_THROWS_AS((void)tmqi(s, s), std::runtime_error); // hdr arg must be bt2020+pq
    CHECK_THROWS_AS((void)tmqi(h, h), std::runtime_error); // sdr arg must be bt709+gamma709
    Image small = random_img(64, 64, Gamut::BT2020, Transfer::PQ, 31);
    Image small_sdr = tmo_clip(small);
    CHECK_THROWS_AS((void)tmqi(small, small_sdr), std::invalid_argument);
    Image other = random_img(176, 178, Gamut::BT2020, Transfer::PQ, 32);
    CHECK_THROWS_AS((void)tmqi(other, s), std::invalid_argument);
}

TEST_CASE("tmo analysis averages the per-frame metrics") {
    std::vector<Image> hdr = {make_scene_hdr(), random_img(176, 176, Gamut::BT2020,
                                                           Transfer::PQ, 33)};
    std::vector<Image> gt;
    gt.reserve(hdr.size());
    for (const Image& h : hdr) gt.push_back(tmo_hable(h));

    std::vector<TmoAnalysisRow> rows = analyze_tmos(hdr, gt, {"clip", "mulaw-cgm", "clip"}, {});
    REQUIRE(rows.size() == 3u);
    CHECK(rows[0].tmo == "clip");
    CHECK(rows[1].tmo == "mulaw-cgm");

    // Independent per-frame averages.
    for (const std::string& name : {std::string("clip"), std::string("mulaw-cgm")}) {
        double st = 0.0, sp = 0.0, sc = 0.0;
        for (size_t i = 0; i < hdr.size(); ++i) {
            Image mapped = apply_tmo(name, hdr[i], {});
            st += tmqi(hdr[i], mapped).q;
            sp += psnr(mapped, gt[i]);
            sc += ciede2000(mapped, gt[i]);
        }
        const TmoAnalysisRow& row = name == "clip" ? rows[0] : rows[1];
        CHECK(row.mean_tmqi == doctest::Approx(st / 2.0).epsilon(1e-12));
        CHECK(row.mean_psnr == doctest::Approx(sp / 2.0).epsilon(1e-12));
        CHECK(row.mean_ciede == doctest::Approx(sc / 2.0).epsilon(1e-12));
    }

    // Duplicate operators produce identical rows.
    CHECK(rows[0].mean_tmqi == rows[2].mean_tmqi);
    CHECK(rows[0].mean_psnr == rows[2].mean_psnr);
    CHECK(rows[0].mean_ciede == rows[2].mean_ciede);

    gt.pop_back();
    CHECK_THROWS_AS((void)analyze_tmos(hdr, gt, {"clip"}, {}), std::invalid_argument);
    gt.push_back(tmo_hable(hdr[1]));
    CHECK_THROWS_AS((void)analyze_tmos(hdr, gt, {}, {}), std::invalid_argument);
}

} // TEST_SUITE
