#pragma once

#include "hdrsynth/image.hpp"
#include "hdrsynth/lut.hpp"

#include <vector>

namespace hdrsynth {

// Radiance thresholds from nearest-rank percentiles.
struct Thresholds {
    double alpha = 0.0; // high cut (a-th percentile)
    double beta = 0.0;  // low cut (b-th percentile)
    bool degenerate = false;
};

// Binary three-way partition of a frame by radiance, plus the mid-region
// blend weight w = mu_law_inv(clamp((L - beta)/(alpha - beta), 0, 1)).
struct RegionMasks {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> high, mid, low; // exactly one set per pixel
    std::vector<double> w;
    double alpha = 0.0;
    double beta = 0.0;
};

struct HtmpConfig {
    double a = 95.0;   // percentile for alpha
    double b = 5.0;    // percentile for beta
    double mu = 5000.0;
    Lut3D lut;         // the y(.) operator; defaults to a 17^3 identity
    bool radiance_maxrgb = false; // max channel instead of luminance weights

    HtmpConfig() : lut(make_identity_lut(17)) {}
};

// Per-pixel linear radiance: BT.2020 luminance weights on pq_eotf of the
// channels (or the max linear channel when maxrgb is set).
std::vector<double> radiance_map(const Image& h, bool maxrgb = false);

// Nearest-rank percentiles: value at rank ceil(p/100 * n) of the sorted
// samples (1-based). A flat histogram (alpha == beta) is widened to the
// next representable double and flagged.
Thresholds thresholds(const std::vector<double>& L, double a, double b);

RegionMasks region_masks(const std::vector<double>& L, int width, int height, double alpha,
                         double beta, double mu = 5000.0); // throws if alpha <= beta

// Composite supervision target:
//   T = high*1 + mid*(w*mulaw_cgm + (1-w)*lut) + low*linear
// with masks broadcast across channels.
struct HtmpSupervision {
    Image target; // BT709+Gamma709
    RegionMasks masks;
    Thresholds cuts;
};
HtmpSupervision htmp_supervision(const Image& h, const HtmpConfig& cfg);
Image htmp_target(const Image& h, const HtmpConfig& cfg);

// Mean-L1 distance to the target, reported per region. Each component is
// the L1 sum over its masked pixels divided by 3*n_total, so the
// components sum to the mean-L1 total by the partition identity.
struct HtmpLoss {
    double total = 0.0;
    double high = 0.0;
    double mid = 0.0;
    double low = 0.0;
};
HtmpLoss htmp_loss(const Image& s, const Image& h, const HtmpConfig& cfg);
HtmpLoss htmp_loss(const Image& s, const HtmpSupervision& sup);

// d(total)/d(s) per pixel-channel: sign(s - T)/(3*n); 0 at equality.
std::vector<double> htmp_loss_grad(const Image& s, const Image& h, const HtmpConfig& cfg);
std::vector<double> htmp_loss_grad(const Image& s, const HtmpSupervision& sup);

} // namespace hdrsynth
