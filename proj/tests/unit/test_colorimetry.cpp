#include <doctest.h>

#include "hdrsynth/colorimetry.hpp"

#include <cmath>
#include <stdexcept>

using namespace hdrsynth;

// Reference values in this suite were computed independently with 50-digit
// decimal arithmetic from the ST 2084 / BT.709 / BT.2020 / BT.2100 constants
// and rounded to 17 significant digits.

namespace {

bool close(double got, double want, double tol) {
    return std::fabs(got - want) <= tol * (1.0 + std::fabs(want));
}

void check_mat(const Mat3& got, const std::array<double, 9>& want) {
    for (int i = 0; i < 9; ++i) {
        CAPTURE(i);
        CHECK(close(got.m[i], want[i], 1e-14));
    }
}

} // namespace

TEST_SUITE("colorimetry") {

TEST_CASE("pq transfer matches ST 2084 closed forms") {
    CHECK(pq_eotf(0.0) == 0.0);
    CHECK(pq_oetf(0.0) == 0.0);
    CHECK(pq_eotf(1.0) == 1.0);
    CHECK(pq_oetf(1.0) == 1.0);

    CHECK(close(pq_eotf(0.5), 0.0092245708994064079, 1e-14));
    CHECK(close(pq_eotf(0.6), 0.024400519233637569, 1e-14));
    CHECK(close(pq_oetf(0.01), 0.50807842151739486, 1e-14));   // 100 cd/m^2
    CHECK(close(pq_oetf(0.005), 0.44028157342045794, 1e-14));  // 50 cd/m^2

    // Out-of-range inputs clamp instead of extrapolating.
    CHECK(pq_oetf(2.0) == 1.0);
    CHECK(pq_eotf(-0.25) == 0.0);
    CHECK(pq_oetf(-1e-9) == 0.0);

    // Round trips in both directions.
    for (double lin : {1e-6, 1e-4, 0.01, 0.18, 0.5, 1.0})
        CHECK(close(pq_eotf(pq_oetf(lin)), lin, 1e-12));
    for (double code : {0.05, 0.25, 0.5, 0.75, 0.99})
        CHECK(close(pq_oetf(pq_eotf(code)), code, 1e-12));

    // Strictly monotone on a coarse grid.
    double prev = -1.0;
    for (int k = 0; k <= 100; ++k) {
        double v = pq_eotf(k / 100.0);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("bt709 oetf knee and reference values") {
    CHECK(gamma709_oetf(0.0) == 0.0);
    CHECK(gamma709_eotf(0.0) == 0.0);
    CHECK(gamma709_oetf(1.0) == 1.0);
    CHECK(gamma709_eotf(1.0) == 1.0);

    CHECK(close(gamma709_oetf(0.5), 0.70551508992212117, 1e-14));
    CHECK(close(gamma709_eotf(0.5), 0.25958940050628574, 1e-14));

    // Linear segment below the 0.018 knee, slope 4.5; the knee itself
    // belongs to the power branch (0.018 <= L).
    CHECK(close(gamma709_oetf(0.01), 0.045, 1e-15));
    CHECK(close(gamma709_eotf(0.045), 0.01, 1e-15));
    CHECK(close(gamma709_oetf(0.0179), 4.5 * 0.0179, 1e-15));
    CHECK(close(gamma709_oetf(0.018), 1.099 * std::pow(0.018, 0.45) - 0.099, 1e-14));

    // Round trips away from the knee.
    for (double lin : {0.001, 0.01, 0.05, 0.3, 0.7, 0.95})
        CHECK(close(gamma709_eotf(gamma709_oetf(lin)), lin, 1e-13));

    // The two branches do not meet exactly: the power branch resumes at
    // code 1.099*0.018^0.45 - 0.099 ~ 0.0812479, so codes inside
    // [0.081, 0.0812479) decode below the knee and re-encode lower.
    // oetf(eotf(.)) is therefore not an identity on that interval.
    CHECK(std::fabs(gamma709_oetf(gamma709_eotf(0.0811)) - 0.0811) > 1e-4);
    CHECK(close(gamma709_oetf(gamma709_eotf(0.0813)), 0.0813, 1e-13));
}

TEST_CASE("mu-law compressor and exact inverse") {
    CHECK(mu_law(0.0) == 0.0);
    CHECK(mu_law(1.0) == 1.0);
    CHECK(mu_law_inv(0.0) == 0.0);
    CHECK(close(mu_law_inv(1.0), 1.0, 1e-15)); // expm1/log1p leave ~1 ulp

    CHECK(close(mu_law(1.0 / 5000.0), 0.081380202441033333, 1e-14));
    CHECK(close(mu_law_inv(0.5), 0.013943549766589716, 1e-14));
    CHECK(close(mu_law(0.5, 100.0), std::log1p(50.0) / std::log1p(100.0), 1e-15));

    for (double x : {1e-5, 1e-3, 0.1, 0.5, 0.9})
        CHECK(close(mu_law_inv(mu_law(x)), x, 1e-13));

    // Compresses: heavy gain near black, attenuation near white.
    CHECK(mu_law(0.01) > 0.3);
    CHECK(mu_law(0.9) < 0.99);
}

TEST_CASE("primary matrices match chromaticity-derived references") {
    check_mat(bt709_to_xyz(),
              {0.41239079926595948, 0.35758433938387796, 0.18048078840183429,
               0.21263900587151036, 0.71516867876775593, 0.072192315360733715,
               0.019330818715591851, 0.11919477979462599, 0.95053215224966058});
    check_mat(bt2020_to_xyz(),
              {0.63695804830129129, 0.14461690358620837, 0.16888097516417206,
               0.26270021201126703, 0.67799807151887102, 0.059301716469861946,
               0.0, 0.028072693049087508, 1.0609850577107909});
    check_mat(bt2020_to_bt709(),
              {1.6604910021084344, -0.58764113878854953, -0.072849863319884878,
               -0.12455047452159074, 1.1328998971259602, -0.0083494226043694769,
               -0.018150763354905304, -0.10057889800800738, 1.1187296613629127});
    check_mat(bt709_to_bt2020(),
              {0.62740389593469908, 0.32928303837788369, 0.043313065687417227,
               0.069097289358232077, 0.91954039507545875, 0.011362315566309177,
               0.016391438875150279, 0.088013307877225755, 0.89559525324762397});
}

TEST_CASE("matrix inverse and products") {
    const Mat3& f = bt709_to_bt2020();
    Mat3 id = f.mul(f.inverse());
    for (int i = 0; i < 9; ++i)
        CHECK(std::fabs(id.m[i] - (i % 4 == 0 ? 1.0 : 0.0)) < 1e-14);

    // The two gamut conversions are inverses of each other.
    Mat3 round = bt2020_to_bt709().mul(bt709_to_bt2020());
    for (int i = 0; i < 9; ++i)
        CHECK(std::fabs(round.m[i] - (i % 4 == 0 ? 1.0 : 0.0)) < 1e-14);

    // D65 white is shared, so white maps to white.
    Rgb w = bt2020_to_bt709().apply({1.0, 1.0, 1.0});
    for (double v : w) CHECK(close(v, 1.0, 1e-13));

    Mat3 sing;
    sing.m = {1, 2, 3, 2, 4, 6, 0, 0, 1};
    CHECK_THROWS_AS((void)sing.inverse(), std::runtime_error);
}

TEST_CASE("bt2020 luminance weights") {
    CHECK(close(bt2020_luminance({1.0, 1.0, 1.0}), 1.0, 1e-15));
    CHECK(bt2020_luminance({1.0, 0.0, 0.0}) == 0.2627);
    CHECK(bt2020_luminance({0.0, 1.0, 0.0}) == 0.6780);
    CHECK(bt2020_luminance({0.0, 0.0, 1.0}) == 0.0593);
}

TEST_CASE("cgm pixel: decode, regamut, clip, encode") {
    // Saturated BT.2020 green leaves the 709 gamut; red/blue clip to zero.
    Rgb g = cgm_pixel({0.0, 0.6, 0.0});
    CHECK(g[0] == 0.0);
    CHECK(close(g[1], 0.11963186771529433, 1e-13));
    CHECK(g[2] == 0.0);

    // Gray is gamut-neutral: channels agree and match the scalar chain.
    Rgb n = cgm_pixel({0.5, 0.5, 0.5});
    double want = gamma709_oetf(pq_eotf(0.5));
    for (double v : n) CHECK(close(v, want, 1e-13));

    Rgb black = cgm_pixel({0.0, 0.0, 0.0});
    for (double v : black) CHECK(v == 0.0);
    Rgb white = cgm_pixel({1.0, 1.0, 1.0});
    for (double v : white) CHECK(close(v, 1.0, 1e-13));
}

TEST_CASE("lab conversion against CIE 1976 endpoints") {
    Lab white = linear709_to_lab({1.0, 1.0, 1.0});
    CHECK(white.L == 100.0);
    CHECK(white.a == 0.0);
    CHECK(white.b == 0.0);

    Lab black = linear709_to_lab({0.0, 0.0, 0.0});
    CHECK(std::fabs(black.L) < 1e-12);
    CHECK(std::fabs(black.a) < 1e-12);
    CHECK(std::fabs(black.b) < 1e-12);

    // Mid gray: linear level of SDR code 0.5.
    double lin = gamma709_eotf(0.5);
    Lab gray = linear709_to_lab({lin, lin, lin});
    CHECK(close(gray.L, 57.998055518217839, 1e-13));
    CHECK(std::fabs(gray.a) < 1e-10);
    CHECK(std::fabs(gray.b) < 1e-10);

    // Red is warm (a > 0), blue is cold (b < 0).
    CHECK(linear709_to_lab({0.5, 0.0, 0.0}).a > 0.0);
    CHECK(linear709_to_lab({0.0, 0.0, 0.5}).b < 0.0);
}

TEST_CASE("ictcp conversion matches BT.2100") {
    Ictcp v = pq2020_to_ictcp({0.4, 0.3, 0.2});
    CHECK(close(v.i, 0.33593718178083803, 1e-13));
    CHECK(close(v.ct, -0.10770996104618718, 1e-13));
    CHECK(close(v.cp, 0.14965135271845497, 1e-13));

    // Grays are achromatic; intensity tracks the code value.
    Ictcp g1 = pq2020_to_ictcp({0.2, 0.2, 0.2});
    Ictcp g2 = pq2020_to_ictcp({0.7, 0.7, 0.7});
    CHECK(std::fabs(g1.ct) < 1e-12);
    CHECK(std::fabs(g1.cp) < 1e-12);
    CHECK(g2.i > g1.i);

    Ictcp black = pq2020_to_ictcp({0.0, 0.0, 0.0});
    CHECK(black.i == 0.0);
    CHECK(black.ct == 0.0);
    CHECK(black.cp == 0.0);
}

TEST_CASE("tag names round trip") {
    CHECK(gamut_from_string(to_string(Gamut::BT709)) == Gamut::BT709);
    CHECK(gamut_from_string(to_string(Gamut::BT2020)) == Gamut::BT2020);
    CHECK(transfer_from_string(to_string(Transfer::Linear)) == Transfer::Linear);
    CHECK(transfer_from_string(to_string(Transfer::PQ)) == Transfer::PQ);
    CHECK(transfer_from_string(to_string(Transfer::Gamma709)) == Transfer::Gamma709);
    CHECK_THROWS_AS((void)gamut_from_string("p3"), std::invalid_argument);
    CHECK_THROWS_AS((void)transfer_from_string("hlg"), std::invalid_argument);
}

} // TEST_SUITE
