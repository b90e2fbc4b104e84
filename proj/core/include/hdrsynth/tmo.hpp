#pragma once

#include "hdrsynth/image.hpp"
#include "hdrsynth/lut.hpp"

#include <optional>
#include <string>

namespace hdrsynth {

// All operators take BT.2020+PQ input and produce BT.709+Gamma709 output.
// Shared linear-light path: pq_eotf per channel, then the 2020->709 matrix.

// Linear level treated as reference white by tmo_clip (100 cd/m^2 on the
// PQ scale where 1.0 = 10000 cd/m^2).
inline constexpr double kClipWhiteLinear = 0.01;

// Scales linear 709 light so white_linear maps to 1.0, clips, encodes.
Image tmo_clip(const Image& h, double white_linear = kClipWhiteLinear);

// Normalizes by the percentile (nearest-rank, default 99.9) of the
// per-pixel max channel of linear 709 light. A black frame has normalizer
// 0; it is returned black and flagged on stderr.
Image tmo_linear(const Image& h, double percentile = 99.9);

// x/(1+x) per channel on exposure-scaled linear 709 light. When exposure
// is not given it is chosen so the geometric-mean luminance maps to 0.18.
Image tmo_reinhard(const Image& h, std::optional<double> exposure = std::nullopt);

// Filmic curve f(x)/f(W), W = 11.2, same exposure rule as tmo_reinhard.
Image tmo_hable(const Image& h, std::optional<double> exposure = std::nullopt);

// mu_law applied per channel to the gamma-encoded cgm output.
Image tmo_mulaw_cgm(const Image& h, double mu = 5000.0);

// Trilinear LUT on the PQ code values; LUT domain must be [0,1]^3.
Image lut_apply(const Image& h, const Lut3D& lut);

// Frame statistics backing the operators above.
double auto_exposure(const Image& h);                      // 0.18 / geometric-mean luminance
double linear_normalizer(const Image& h, double percentile); // tmo_linear's divisor
double scene_max_linear(const Image& h);                   // max channel of linear 709 light

// Pointwise curve factories (PQ code triplet -> SDR code triplet) for LUT
// baking; frame-statistic parameters are explicit here.
PixelCurve clip_curve(double white_linear = kClipWhiteLinear);
PixelCurve linear_curve(double normalizer);
PixelCurve reinhard_curve(double exposure);
PixelCurve hable_curve(double exposure);
PixelCurve mulaw_cgm_curve(double mu = 5000.0);

// Scalar filmic curve (already white-normalized): hable_curve_value(W)=1.
double hable_curve_value(double x);

// Name-based dispatch used by the CLI and the analysis driver.
// Names: clip, linear, reinhard, hable, mulaw-cgm, lut.
struct TmoOptions {
    double mu = 5000.0;
    std::optional<double> exposure;       // reinhard/hable override
    std::optional<double> clip_white;     // clip override; nullopt = reference white
    double linear_percentile = 99.9;
    const Lut3D* lut = nullptr;           // required for "lut"
};
Image apply_tmo(const std::string& name, const Image& h, const TmoOptions& opt = {});

} // namespace hdrsynth
