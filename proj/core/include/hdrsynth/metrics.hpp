#pragma once

#include "hdrsynth/image.hpp"
#include "hdrsynth/tmo.hpp"

#include <string>
#include <vector>

namespace hdrsynth {

inline constexpr double kPsnrCap = 99.0; // reported when MSE is exactly 0

// 10*log10(1/MSE) over all pixel-channels of same-size images.
double psnr(const Image& a, const Image& b);

// Both inputs BT2020+PQ. Per stop: linearize, scale by 2^stop, encode with
// gamma 1/2.2, clip to [0,1]; mPSNR = 10*log10(1/mean of per-stop MSEs).
double mpsnr(const Image& a, const Image& b,
             const std::vector<double>& stops = {-2, -1, 0, 1, 2});

// Luma of encoded values (weights by gamut), 11x11 Gaussian window with
// sigma 1.5 in valid mode, K1=0.01, K2=0.03, L=1.
double ssim(const Image& a, const Image& b);

// 5 scales, weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), dyadic 2x2
// mean-pool downsampling; contrast-structure at scales 1-4, full SSIM at
// scale 5. Requires min dimension >= 11*2^4 = 176.
double ms_ssim(const Image& a, const Image& b);

// Scalar CIEDE 2000 with the hue-rotation term.
double ciede2000_lab(const Lab& x, const Lab& y);
// Mean over pixels of same-size BT709+Gamma709 images.
double ciede2000(const Image& a, const Image& b);

// Mean over pixels: 720*sqrt(dI^2 + (dCt/2)^2 + dCp^2) in ICtCp, for
// BT2020+PQ images.
double delta_e_itp(const Image& a, const Image& b);

// Tone-mapping quality index: structural fidelity S (multi-scale local
// similarity with a contrast-visibility mapping), statistical naturalness
// N (brightness/contrast density models), Q = 0.8012*S^0.3046 +
// 0.1988*N^0.7088. hdr is BT2020+PQ, sdr BT709+Gamma709, same dimensions,
// min dimension >= 176. Intentionally asymmetric in its arguments.
struct TmqiResult {
    double q = 0.0, s = 0.0, n = 0.0;
};
TmqiResult tmqi(const Image& hdr, const Image& sdr);

// One row per operator: TMQI against the HDR input, PSNR/CIEDE against the
// ground-truth SDR, each averaged over the paired set.
struct TmoAnalysisRow {
    std::string tmo;
    double mean_tmqi = 0.0;
    double mean_psnr = 0.0;
    double mean_ciede = 0.0;
};
std::vector<TmoAnalysisRow> analyze_tmos(const std::vector<Image>& hdr_set,
                                         const std::vector<Image>& gt_sdr_set,
                                         const std::vector<std::string>& tmos,
                                         const TmoOptions& opt = {});

} // namespace hdrsynth
