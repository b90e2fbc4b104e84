#include "hdrsynth/tmo.hpp"

#include "hdrsynth/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hdrsynth {

namespace {

void require_hdr(const Image& h, const char* op) {
    if (h.gamut != Gamut::BT2020 || h.transfer != Transfer::PQ)
        throw std::runtime_error(std::string(op) + ": expected bt2020+pq input");
}

Rgb linear709_of(const Rgb& pq_code) {
    Rgb lin = {pq_eotf(pq_code[0]), pq_eotf(pq_code[1]), pq_eotf(pq_code[2])};
    return bt2020_to_bt709().apply(lin);
}

Rgb clip_encode(const Rgb& lin709) {
    Rgb out;
    for (int c = 0; c < 3; ++c)
        out[c] = gamma709_oetf(std::clamp(lin709[static_cast<size_t>(c)], 0.0, 1.0));
    return out;
}

// Luminance of linear BT.709 light = Y row of the RGB->XYZ matrix.
double luminance709(const Rgb& lin) {
    const Mat3& m = bt709_to_xyz();
    return m.m[3] * lin[0] + m.m[4] * lin[1] + m.m[5] * lin[2];
}

Image apply_curve(const Image& h, const PixelCurve& curve, const char* op) {
    require_hdr(h, op);
    Image out(h.width, h.height, Gamut::BT709, Transfer::Gamma709);
    parallel_chunks(h.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = h.data.data() + 3 * i;
            Rgb s = curve({static_cast<double>(p[0]), static_cast<double>(p[1]),
                           static_cast<double>(p[2])});
            float* q = out.data.data() + 3 * i;
            for (int c = 0; c < 3; ++c)
                q[c] = static_cast<float>(std::clamp(s[static_cast<size_t>(c)], 0.0, 1.0));
        }
    });
    return out;
}

} // namespace

double hable_curve_value(double x) {
    constexpr double A = 0.15, B = 0.50, C = 0.10, D = 0.20, E = 0.02, F = 0.30;
    constexpr double W = 11.2;
    auto f = [&](double v) {
        return (v * (A * v + C * B) + D * E) / (v * (A * v + B) + D * F) - E / F;
    };
    static const double fw = f(W);
    return f(x) / fw;
}

PixelCurve clip_curve(double white_linear) {
    if (white_linear <= 0.0) throw std::runtime_error("clip_curve: white must be > 0");
    double scale = 1.0 / white_linear;
    return [scale](const Rgb& pq) {
        Rgb lin = linear709_of(pq);
        return clip_encode({lin[0] * scale, lin[1] * scale, lin[2] * scale});
    };
}

PixelCurve linear_curve(double normalizer) {
    double scale = normalizer > 0.0 ? 1.0 / normalizer : 0.0;
    return [scale](const Rgb& pq) {
        Rgb lin = linear709_of(pq);
        return clip_encode({lin[0] * scale, lin[1] * scale, lin[2] * scale});
    };
}

PixelCurve reinhard_curve(double exposure) {
    return [exposure](const Rgb& pq) {
        Rgb lin = linear709_of(pq);
        Rgb out;
        for (int c = 0; c < 3; ++c) {
            double x = std::max(0.0, lin[static_cast<size_t>(c)] * exposure);
            out[c] = x / (1.0 + x);
        }
        return clip_encode(out);
    };
}

PixelCurve hable_curve(double exposure) {
    return [exposure](const Rgb& pq) {
        Rgb lin = linear709_of(pq);
        Rgb out;
        for (int c = 0; c < 3; ++c) {
            double x = std::max(0.0, lin[static_cast<size_t>(c)] * exposure);
            out[c] = hable_curve_value(x);
        }
        return clip_encode(out);
    };
}

PixelCurve mulaw_cgm_curve(double mu) {
    if (mu <= 0.0) throw std::runtime_error("mulaw_cgm_curve: mu must be > 0");
    return [mu](const Rgb& pq) {
        Rgb g = cgm_pixel(pq);
        return Rgb{mu_law(g[0], mu), mu_law(g[1], mu), mu_law(g[2], mu)};
    };
}

double auto_exposure(const Image& h) {
    require_hdr(h, "auto_exposure");
    // Geometric mean of luminance, guarded away from log(0).
    constexpr double kLogFloor = 1e-8;
    double acc = 0.0;
    const long n = h.pixels();
    for (long i = 0; i < n; ++i) {
        const float* p = h.data.data() + 3 * i;
        Rgb lin = linear709_of({static_cast<double>(p[0]), static_cast<double>(p[1]),
                                static_cast<double>(p[2])});
        acc += std::log(std::max(luminance709(lin), kLogFloor));
    }
    return 0.18 / std::exp(acc / static_cast<double>(n));
}

double linear_normalizer(const Image& h, double percentile) {
    require_hdr(h, "linear_normalizer");
    if (percentile <= 0.0 || percentile > 100.0)
        throw std::runtime_error("linear_normalizer: percentile out of (0,100]");
    const long n = h.pixels();
    std::vector<double> maxc(static_cast<size_t>(n));
    parallel_chunks(n, [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = h.data.data() + 3 * i;
            Rgb lin = linear709_of({static_cast<double>(p[0]), static_cast<double>(p[1]),
                                    static_cast<double>(p[2])});
            maxc[static_cast<size_t>(i)] = std::max({lin[0], lin[1], lin[2]});
        }
    });
    long rank = static_cast<long>(std::ceil(percentile / 100.0 * static_cast<double>(n)));
    rank = std::clamp(rank, 1L, n);
    std::nth_element(maxc.begin(), maxc.begin() + (rank - 1), maxc.end());
    return maxc[static_cast<size_t>(rank - 1)];
}

double scene_max_linear(const Image& h) {
    require_hdr(h, "scene_max_linear");
    double best = 0.0;
    const long n = h.pixels();
    for (long i = 0; i < n; ++i) {
        const float* p = h.data.data() + 3 * i;
        Rgb lin = linear709_of({static_cast<double>(p[0]), static_cast<double>(p[1]),
                                static_cast<double>(p[2])});
        best = std::max({best, lin[0], lin[1], lin[2]});
    }
    return best;
}

Image tmo_clip(const Image& h, double white_linear) {
    return apply_curve(h, clip_curve(white_linear), "tmo_clip");
}

Image tmo_linear(const Image& h, double percentile) {
    double norm = linear_normalizer(h, percentile);
    if (norm <= 0.0) {
        std::fprintf(stderr, "tmo_linear: black input, normalizer is 0; returning black\n");
        Image out(h.width, h.height, Gamut::BT709, Transfer::Gamma709);
        return out;
    }
    return apply_curve(h, linear_curve(norm), "tmo_linear");
}

Image tmo_reinhard(const Image& h, std::optional<double> exposure) {
    double e = exposure ? *exposure : auto_exposure(h);
    return apply_curve(h, reinhard_curve(e), "tmo_reinhard");
}

Image tmo_hable(const Image& h, std::optional<double> exposure) {
    double e = exposure ? *exposure : auto_exposure(h);
    return apply_curve(h, hable_curve(e), "tmo_hable");
}

Image tmo_mulaw_cgm(const Image& h, double mu) {
    return apply_curve(h, mulaw_cgm_curve(mu), "tmo_mulaw_cgm");
}

Image lut_apply(const Image& h, const Lut3D& lut) {
    require_hdr(h, "lut_apply");
    for (int c = 0; c < 3; ++c) {
        if (std::fabs(lut.domain_min[static_cast<size_t>(c)]) > 1e-9 ||
            std::fabs(lut.domain_max[static_cast<size_t>(c)] - 1.0) > 1e-9)
            throw std::runtime_error("lut_apply: LUT domain must be [0,1]");
    }
    Image out(h.width, h.height, Gamut::BT709, Transfer::Gamma709);
    parallel_chunks(h.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = h.data.data() + 3 * i;
            Rgb s = lut.sample({static_cast<double>(p[0]), static_cast<double>(p[1]),
                                static_cast<double>(p[2])});
            float* q = out.data.data() + 3 * i;
            for (int c = 0; c < 3; ++c)
                q[c] = static_cast<float>(std::clamp(s[static_cast<size_t>(c)], 0.0, 1.0));
        }
    });
    return out;
}

Image apply_tmo(const std::string& name, const Image& h, const TmoOptions& opt) {
    if (name == "clip") {
        double white = opt.clip_white ? *opt.clip_white : kClipWhiteLinear;
        return tmo_clip(h, white);
    }
    if (name == "linear") return tmo_linear(h, opt.linear_percentile);
    if (name == "reinhard") return tmo_reinhard(h, opt.exposure);
    if (name == "hable") return tmo_hable(h, opt.exposure);
    if (name == "mulaw-cgm") return tmo_mulaw_cgm(h, opt.mu);
    if (name == "lut") {
        if (!opt.lut) throw std::runtime_error("apply_tmo: lut requested but none supplied");
        return lut_apply(h, *opt.lut);
    }
    throw std::runtime_error("apply_tmo: unknown operator '" + name + "'");
}

} // namespace hdrsynth
