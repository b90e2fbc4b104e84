#include "hdrsynth/htmp.hpp"

#include "hdrsynth/parallel.hpp"
#include "hdrsynth/tmo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hdrsynth {

std::vector<double> radiance_map(const Image& h, bool maxrgb) {
    if (h.gamut != Gamut::BT2020 || h.transfer != Transfer::PQ)
        throw std::runtime_error("radiance_map: expected bt2020+pq input");
    std::vector<double> L(static_cast<size_t>(h.pixels()));
    parallel_chunks(h.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = h.data.data() + 3 * i;
            double r = pq_eotf(p[0]), g = pq_eotf(p[1]), b = pq_eotf(p[2]);
            L[static_cast<size_t>(i)] =
                maxrgb ? std::max({r, g, b}) : bt2020_luminance({r, g, b});
        }
    });
    return L;
}

Thresholds thresholds(const std::vector<double>& L, double a, double b) {
    if (L.empty()) throw std::runtime_error("thresholds: empty radiance map");
    if (!(0.0 < b && b < a && a < 100.0) && !(a == 100.0 && 0.0 < b && b < a))
        throw std::runtime_error("thresholds: need 0 < b < a <= 100");
    const long n = static_cast<long>(L.size());
    auto rank_value = [&](double p) {
        long rank = static_cast<long>(std::ceil(p / 100.0 * static_cast<double>(n)));
        rank = std::clamp(rank, 1L, n);
        std::vector<double> tmp(L);
        std::nth_element(tmp.begin(), tmp.begin() + (rank - 1), tmp.end());
        return tmp[static_cast<size_t>(rank - 1)];
    };
    Thresholds t;
    t.alpha = rank_value(a);
    t.beta = rank_value(b);
    if (t.alpha <= t.beta) {
        // A flat histogram carries no region information; widen to an
        // alpha = beta + ulp ladder placed so the level lands in one
        // region: nonzero radiance counts as highlight, black as shadow.
        t.degenerate = true;
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (t.beta > 0.0) {
            t.alpha = std::nextafter(t.beta, -inf);
            t.beta = std::nextafter(t.alpha, -inf);
        } else {
            t.beta = std::nextafter(t.beta, inf);
            t.alpha = std::nextafter(t.beta, inf);
        }
    }
    return t;
}

RegionMasks region_masks(const std::vector<double>& L, int width, int height, double alpha,
                         double beta, double mu) {
    if (static_cast<long>(L.size()) != static_cast<long>(width) * height)
        throw std::runtime_error("region_masks: size mismatch");
    if (alpha <= beta) throw std::runtime_error("region_masks: need alpha > beta");
    RegionMasks m;
    m.width = width;
    m.height = height;
    m.alpha = alpha;
    m.beta = beta;
    const size_t n = L.size();
    m.high.assign(n, 0);
    m.mid.assign(n, 0);
    m.low.assign(n, 0);
    m.w.assign(n, 0.0);
    const double span = alpha - beta;
    parallel_chunks(static_cast<long>(n), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            size_t k = static_cast<size_t>(i);
            double l = L[k];
            if (l > alpha)
                m.high[k] = 1;
            else if (l < beta)
                m.low[k] = 1;
            else
                m.mid[k] = 1;
            // expm1/log1p leave mu_law_inv(1.0) one ulp above 1; keep w in [0,1].
            m.w[k] = std::clamp(mu_law_inv(std::clamp((l - beta) / span, 0.0, 1.0), mu), 0.0, 1.0);
        }
    });
    return m;
}

HtmpSupervision htmp_supervision(const Image& h, const HtmpConfig& cfg) {
    std::vector<double> L = radiance_map(h, cfg.radiance_maxrgb);
    HtmpSupervision sup;
    sup.cuts = thresholds(L, cfg.a, cfg.b);
    sup.masks = region_masks(L, h.width, h.height, sup.cuts.alpha, sup.cuts.beta, cfg.mu);

    Image mid_mu = tmo_mulaw_cgm(h, cfg.mu);
    Image mid_lut = lut_apply(h, cfg.lut);
    Image low = tmo_linear(h);

    sup.target = Image(h.width, h.height, Gamut::BT709, Transfer::Gamma709);
    const RegionMasks& m = sup.masks;
    parallel_chunks(h.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            size_t k = static_cast<size_t>(i);
            float* t = sup.target.data.data() + 3 * i;
            if (m.high[k]) {
                t[0] = t[1] = t[2] = 1.0f;
            } else if (m.low[k]) {
                const float* s = low.data.data() + 3 * i;
                t[0] = s[0];
                t[1] = s[1];
                t[2] = s[2];
            } else {
                const float* a = mid_mu.data.data() + 3 * i;
                const float* b = mid_lut.data.data() + 3 * i;
                double w = m.w[k];
                for (int c = 0; c < 3; ++c)
                    t[c] = static_cast<float>(w * a[c] + (1.0 - w) * b[c]);
            }
        }
    });
    return sup;
}

Image htmp_target(const Image& h, const HtmpConfig& cfg) {
    return htmp_supervision(h, cfg).target;
}

HtmpLoss htmp_loss(const Image& s, const HtmpSupervision& sup) {
    if (!s.same_shape(sup.target))
        throw std::runtime_error("htmp_loss: size mismatch");
    const long n = s.pixels();
    const double norm = 1.0 / (3.0 * static_cast<double>(n));
    // The total is one fixed-order pass over |s - T| so it matches an
    // independent mean-L1 against the same target to rounding error; the
    // per-region accumulators split the identical terms.
    double tot = 0.0, hi = 0.0, mi = 0.0, lo = 0.0;
    for (long i = 0; i < n; ++i) {
        size_t k = static_cast<size_t>(i);
        const float* a = s.data.data() + 3 * i;
        const float* t = sup.target.data.data() + 3 * i;
        double d = std::fabs(static_cast<double>(a[0]) - t[0]) +
                   std::fabs(static_cast<double>(a[1]) - t[1]) +
                   std::fabs(static_cast<double>(a[2]) - t[2]);
        tot += d;
        if (sup.masks.high[k])
            hi += d;
        else if (sup.masks.low[k])
            lo += d;
        else
            mi += d;
    }
    return {tot * norm, hi * norm, mi * norm, lo * norm};
}

HtmpLoss htmp_loss(const Image& s, const Image& h, const HtmpConfig& cfg) {
    if (!s.same_shape(h)) throw std::runtime_error("htmp_loss: size mismatch");
    return htmp_loss(s, htmp_supervision(h, cfg));
}

std::vector<double> htmp_loss_grad(const Image& s, const HtmpSupervision& sup) {
    if (!s.same_shape(sup.target))
        throw std::runtime_error("htmp_loss_grad: size mismatch");
    const long n = s.pixels() * 3;
    const double g = 1.0 / static_cast<double>(n);
    std::vector<double> grad(static_cast<size_t>(n));
    parallel_chunks(n, [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            double d = static_cast<double>(s.data[static_cast<size_t>(i)]) -
                       sup.target.data[static_cast<size_t>(i)];
            grad[static_cast<size_t>(i)] = d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
        }
    });
    return grad;
}

std::vector<double> htmp_loss_grad(const Image& s, const Image& h, const HtmpConfig& cfg) {
    if (!s.same_shape(h)) throw std::runtime_error("htmp_loss_grad: size mismatch");
    return htmp_loss_grad(s, htmp_supervision(h, cfg));
}

} // namespace hdrsynth
