#include "hdrsynth/colorimetry.hpp"

#include "hdrsynth/image.hpp"
#include "hdrsynth/parallel.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace hdrsynth {

const char* to_string(Gamut g) {
    return g == Gamut::BT709 ? "bt709" : "bt2020";
}

const char* to_string(Transfer t) {
    switch (t) {
        case Transfer::Linear: return "linear";
        case Transfer::PQ: return "pq";
        default: return "gamma709";
    }
}

Gamut gamut_from_string(const char* s) {
    if (std::strcmp(s, "bt709") == 0) return Gamut::BT709;
    if (std::strcmp(s, "bt2020") == 0) return Gamut::BT2020;
    throw std::invalid_argument("unknown gamut: " + std::string(s));
}

Transfer transfer_from_string(const char* s) {
    if (std::strcmp(s, "linear") == 0) return Transfer::Linear;
    if (std::strcmp(s, "pq") == 0) return Transfer::PQ;
    if (std::strcmp(s, "gamma709") == 0) return Transfer::Gamma709;
    throw std::invalid_argument("unknown transfer: " + std::string(s));
}

Mat3 Mat3::inverse() const {
    const auto& a = m;
    double det = a[0] * (a[4] * a[8] - a[5] * a[7]) -
                 a[1] * (a[3] * a[8] - a[5] * a[6]) +
                 a[2] * (a[3] * a[7] - a[4] * a[6]);
    if (std::fabs(det) < 1e-30) throw std::runtime_error("Mat3: singular matrix");
    double inv = 1.0 / det;
    Mat3 r;
    r.m[0] = (a[4] * a[8] - a[5] * a[7]) * inv;
    r.m[1] = (a[2] * a[7] - a[1] * a[8]) * inv;
    r.m[2] = (a[1] * a[5] - a[2] * a[4]) * inv;
    r.m[3] = (a[5] * a[6] - a[3] * a[8]) * inv;
    r.m[4] = (a[0] * a[8] - a[2] * a[6]) * inv;
    r.m[5] = (a[2] * a[3] - a[0] * a[5]) * inv;
    r.m[6] = (a[3] * a[7] - a[4] * a[6]) * inv;
    r.m[7] = (a[1] * a[6] - a[0] * a[7]) * inv;
    r.m[8] = (a[0] * a[4] - a[1] * a[3]) * inv;
    return r;
}

Mat3 Mat3::mul(const Mat3& rhs) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[i * 3 + j] = m[i * 3 + 0] * rhs.m[0 * 3 + j] +
                             m[i * 3 + 1] * rhs.m[1 * 3 + j] +
                             m[i * 3 + 2] * rhs.m[2 * 3 + j];
    return r;
}

// SMPTE ST 2084 constants.
namespace {
constexpr double kPqM1 = 2610.0 / 16384.0;
constexpr double kPqM2 = 2523.0 / 4096.0 * 128.0;
constexpr double kPqC1 = 3424.0 / 4096.0;
constexpr double kPqC2 = 2413.0 / 4096.0 * 32.0;
constexpr double kPqC3 = 2392.0 / 4096.0 * 32.0;
} // namespace

double pq_eotf(double code) {
    if (code <= 0.0) return 0.0;
    if (code > 1.0) code = 1.0;
    double p = std::pow(code, 1.0 / kPqM2);
    double num = p - kPqC1;
    if (num < 0.0) num = 0.0;
    double den = kPqC2 - kPqC3 * p;
    return std::pow(num / den, 1.0 / kPqM1);
}

double pq_oetf(double linear) {
    if (linear <= 0.0) return 0.0;
    if (linear > 1.0) linear = 1.0;
    double y = std::pow(linear, kPqM1);
    return std::pow((kPqC1 + kPqC2 * y) / (1.0 + kPqC3 * y), kPqM2);
}

// BT.709 OETF: 4.5L below the knee, 1.099 L^0.45 - 0.099 above.
namespace {
constexpr double kKnee709 = 0.018;
constexpr double kSlope709 = 4.5;
constexpr double kGain709 = 1.099;
constexpr double kPow709 = 0.45;
} // namespace

double gamma709_oetf(double linear) {
    if (linear <= 0.0) return 0.0;
    if (linear > 1.0) linear = 1.0;
    if (linear < kKnee709) return kSlope709 * linear;
    return kGain709 * std::pow(linear, kPow709) - (kGain709 - 1.0);
}

double gamma709_eotf(double code) {
    if (code <= 0.0) return 0.0;
    if (code > 1.0) code = 1.0;
    if (code < kSlope709 * kKnee709) return code / kSlope709;
    return std::pow((code + (kGain709 - 1.0)) / kGain709, 1.0 / kPow709);
}

double mu_law(double x, double mu) {
    if (x <= 0.0) return 0.0;
    if (x > 1.0) x = 1.0;
    return std::log1p(mu * x) / std::log1p(mu);
}

double mu_law_inv(double y, double mu) {
    if (y <= 0.0) return 0.0;
    if (y > 1.0) y = 1.0;
    return std::expm1(y * std::log1p(mu)) / mu;
}

namespace {

// RGB -> XYZ from primary/white chromaticities: scale columns of the
// xyY-derived matrix so the white point maps to XYZ of the white.
Mat3 rgb_to_xyz_from_chroma(double rx, double ry, double gx, double gy,
                            double bx, double by, double wx, double wy) {
    Mat3 xyz; // columns are XYZ of unit-x primaries
    xyz.m = {rx / ry, gx / gy, bx / by,
             1.0, 1.0, 1.0,
             (1.0 - rx - ry) / ry, (1.0 - gx - gy) / gy, (1.0 - bx - by) / by};
    Rgb white = {wx / wy, 1.0, (1.0 - wx - wy) / wy};
    Rgb s = xyz.inverse().apply(white);
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = xyz.m[i * 3 + j] * s[j];
    return r;
}

constexpr double kD65x = 0.3127, kD65y = 0.3290;

} // namespace

const Mat3& bt709_to_xyz() {
    static const Mat3 m = rgb_to_xyz_from_chroma(0.640, 0.330, 0.300, 0.600,
                                                 0.150, 0.060, kD65x, kD65y);
    return m;
}

const Mat3& bt2020_to_xyz() {
    static const Mat3 m = rgb_to_xyz_from_chroma(0.708, 0.292, 0.170, 0.797,
                                                 0.131, 0.046, kD65x, kD65y);
    return m;
}

const Mat3& bt2020_to_bt709() {
    static const Mat3 m = bt709_to_xyz().inverse().mul(bt2020_to_xyz());
    return m;
}

const Mat3& bt709_to_bt2020() {
    static const Mat3 m = bt2020_to_xyz().inverse().mul(bt709_to_xyz());
    return m;
}

Rgb cgm_pixel(const Rgb& pq_code) {
    Rgb lin = {pq_eotf(pq_code[0]), pq_eotf(pq_code[1]), pq_eotf(pq_code[2])};
    Rgb r709 = bt2020_to_bt709().apply(lin);
    Rgb out;
    for (int i = 0; i < 3; ++i) {
        double v = r709[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out[i] = gamma709_oetf(v);
    }
    return out;
}

namespace {

double lab_f(double t) {
    constexpr double kDelta = 6.0 / 29.0;
    if (t > kDelta * kDelta * kDelta) return std::cbrt(t);
    return t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

} // namespace

Lab linear709_to_lab(const Rgb& rgb) {
    Rgb xyz = bt709_to_xyz().apply(rgb);
    // D65 reference white = bt709_to_xyz() applied to (1,1,1).
    static const Rgb wn = bt709_to_xyz().apply({1.0, 1.0, 1.0});
    double fx = lab_f(xyz[0] / wn[0]);
    double fy = lab_f(xyz[1] / wn[1]);
    double fz = lab_f(xyz[2] / wn[2]);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

namespace {

void require_tags(const Image& img, Gamut g, Transfer t, const char* op) {
    if (img.gamut != g || img.transfer != t)
        throw std::runtime_error(std::string(op) + ": expected " + to_string(g) + "+" +
                                 to_string(t) + " input, got " + to_string(img.gamut) + "+" +
                                 to_string(img.transfer));
}

Rgb load_px(const Image& img, long i) {
    const float* p = img.data.data() + 3 * i;
    return {static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])};
}

} // namespace

Image cgm(const Image& h) {
    require_tags(h, Gamut::BT2020, Transfer::PQ, "cgm");
    Image out(h.width, h.height, Gamut::BT709, Transfer::Gamma709);
    parallel_chunks(h.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            Rgb s = cgm_pixel(load_px(h, i));
            float* p = out.data.data() + 3 * i;
            p[0] = static_cast<float>(s[0]);
            p[1] = static_cast<float>(s[1]);
            p[2] = static_cast<float>(s[2]);
        }
    });
    return out;
}

Planes rgb_to_lab(const Image& s) {
    require_tags(s, Gamut::BT709, Transfer::Gamma709, "rgb_to_lab");
    Planes out;
    out.width = s.width;
    out.height = s.height;
    out.a.resize(static_cast<size_t>(s.pixels()));
    out.b.resize(static_cast<size_t>(s.pixels()));
    out.c.resize(static_cast<size_t>(s.pixels()));
    parallel_chunks(s.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            Rgb code = load_px(s, i);
            Lab lab = linear709_to_lab(
                {gamma709_eotf(code[0]), gamma709_eotf(code[1]), gamma709_eotf(code[2])});
            out.a[static_cast<size_t>(i)] = lab.L;
            out.b[static_cast<size_t>(i)] = lab.a;
            out.c[static_cast<size_t>(i)] = lab.b;
        }
    });
    return out;
}

Planes rgb_to_ictcp(const Image& h) {
    require_tags(h, Gamut::BT2020, Transfer::PQ, "rgb_to_ictcp");
    Planes out;
    out.width = h.width;
    out.height = h.height;
    out.a.resize(static_cast<size_t>(h.pixels()));
    out.b.resize(static_cast<size_t>(h.pixels()));
    out.c.resize(static_cast<size_t>(h.pixels()));
    parallel_chunks(h.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            Ictcp v = pq2020_to_ictcp(load_px(h, i));
            out.a[static_cast<size_t>(i)] = v.i;
            out.b[static_cast<size_t>(i)] = v.ct;
            out.c[static_cast<size_t>(i)] = v.cp;
        }
    });
    return out;
}

Ictcp pq2020_to_ictcp(const Rgb& pq_code) {
    // BT.2100: RGB -> LMS with the integer-coefficient matrix, PQ-encode
    // each of L/M/S, then the fixed ICtCp rotation.
    Rgb lin = {pq_eotf(pq_code[0]), pq_eotf(pq_code[1]), pq_eotf(pq_code[2])};
    double l = (1688.0 * lin[0] + 2146.0 * lin[1] + 262.0 * lin[2]) / 4096.0;
    double m = (683.0 * lin[0] + 2951.0 * lin[1] + 462.0 * lin[2]) / 4096.0;
    double s = (99.0 * lin[0] + 309.0 * lin[1] + 3688.0 * lin[2]) / 4096.0;
    double lp = pq_oetf(l), mp = pq_oetf(m), sp = pq_oetf(s);
    return {(2048.0 * lp + 2048.0 * mp) / 4096.0,
            (6610.0 * lp - 13613.0 * mp + 7003.0 * sp) / 4096.0,
            (17933.0 * lp - 17390.0 * mp - 543.0 * sp) / 4096.0};
}

} // namespace hdrsynth
