#pragma once

#include <array>
#include <cstdint>

namespace hdrsynth {

enum class Gamut : uint8_t { BT709, BT2020 };
enum class Transfer : uint8_t { Linear, PQ, Gamma709 };

const char* to_string(Gamut g);
const char* to_string(Transfer t);
Gamut gamut_from_string(const char* s);       // throws std::invalid_argument
Transfer transfer_from_string(const char* s); // throws std::invalid_argument

using Rgb = std::array<double, 3>;

// Row-major 3x3 linear-light color matrix.
struct Mat3 {
    std::array<double, 9> m{};

    Rgb apply(const Rgb& v) const {
        return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    }
    Mat3 inverse() const;            // throws std::runtime_error if singular
    Mat3 mul(const Mat3& rhs) const; // this * rhs
};

// SMPTE ST 2084 / BT.2100 perceptual quantizer. Code values in [0,1],
// linear light normalized so 1.0 = 10000 cd/m^2 (i.e. 100 nits = 0.01).
double pq_eotf(double code);
double pq_oetf(double linear);

// BT.709 OETF (the camera curve, knee at 0.018) and its exact inverse.
// Used here as the SDR encoding; display-referred in [0,1].
double gamma709_oetf(double linear);
double gamma709_eotf(double code);

// mu-law perceptual compressor on [0,1] and its exact inverse.
double mu_law(double x, double mu = 5000.0);
double mu_law_inv(double y, double mu = 5000.0);

// Linear-light primaries conversions, derived from the BT.709/BT.2020
// chromaticity coordinates with D65 white. Values may leave [0,1].
const Mat3& bt709_to_xyz();
const Mat3& bt2020_to_xyz();
const Mat3& bt2020_to_bt709();
const Mat3& bt709_to_bt2020();

// BT.2020 luma weights applied to linear RGB.
inline double bt2020_luminance(const Rgb& rgb) {
    return 0.2627 * rgb[0] + 0.6780 * rgb[1] + 0.0593 * rgb[2];
}

// One pixel of the conventional colorimetric mapping: PQ code -> linear,
// 2020 -> 709 primaries, hard clip to [0,1], BT.709 encode.
Rgb cgm_pixel(const Rgb& pq_code);

// CIE 1976 L*a*b* (D65) from linear BT.709 RGB.
struct Lab {
    double L, a, b;
};
Lab linear709_to_lab(const Rgb& rgb);

// BT.2100 ICtCp from PQ-encoded BT.2020 RGB.
struct Ictcp {
    double i, ct, cp;
};
Ictcp pq2020_to_ictcp(const Rgb& pq_code);

} // namespace hdrsynth
