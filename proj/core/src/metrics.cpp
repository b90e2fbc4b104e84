#include "hdrsynth/metrics.hpp"

#include "hdrsynth/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace hdrsynth {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * (kPi / 180.0); }

void require_tags(const Image& img, Gamut g, Transfer t, const char* who) {
    if (img.gamut != g || img.transfer != t) {
        throw std::runtime_error(std::string(who) + ": expected " + to_string(g) + "+" +
                                 to_string(t) + " input, got " + to_string(img.gamut) + "+" +
                                 to_string(img.transfer));
    }
}

void require_same_shape(const Image& a, const Image& b, const char* who) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": size mismatch");
}

double capped_db(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// Luma weights applied to the encoded values as stored.
std::array<double, 3> luma_weights(Gamut g) {
    if (g == Gamut::BT2020) return {0.2627, 0.6780, 0.0593};
    return {0.2126, 0.7152, 0.0722};
}

std::vector<double> luma_plane(const Image& img) {
    const std::array<double, 3> w = luma_weights(img.gamut);
    std::vector<double> out(static_cast<size_t>(img.pixels()));
    parallel_chunks(img.pixels(), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = img.data.data() + 3 * i;
            out[static_cast<size_t>(i)] = w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
        }
    });
    return out;
}

// 11-tap Gaussian, sigma 1.5, normalized to unit sum.
const std::array<double, 11>& gauss11() {
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

// Separable valid-mode 11x11 filter: output is (w-10) x (h-10).
std::vector<double> gauss_valid(const std::vector<double>& src, int w, int h) {
    const auto& g = gauss11();
    const int ow = w - 10, oh = h - 10;
    std::vector<double> tmp(static_cast<size_t>(ow) * h);
    parallel_chunks(h, [&](long lo, long hi) {
        for (long y = lo; y < hi; ++y) {
            const double* row = src.data() + y * w;
            double* trow = tmp.data() + y * ow;
            for (int x = 0; x < ow; ++x) {
                double acc = 0.0;
                for (int k = 0; k < 11; ++k) acc += g[static_cast<size_t>(k)] * row[x + k];
                trow[x] = acc;
            }
        }
    });
    std::vector<double> out(static_cast<size_t>(ow) * oh);
    parallel_chunks(oh, [&](long lo, long hi) {
        for (long y = lo; y < hi; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = 0.0;
                for (int k = 0; k < 11; ++k)
                    acc += g[static_cast<size_t>(k)] * tmp[(y + k) * ow + x];
                out[y * ow + x] = acc;
            }
        }
    });
    return out;
}

std::vector<double> mul_planes(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    parallel_chunks(static_cast<long>(a.size()), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i)
            out[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] * b[static_cast<size_t>(i)];
    });
    return out;
}

// 2x2 mean pool, truncating an odd trailing row/column.
void downsample2(std::vector<double>& p, int& w, int& h) {
    const int nw = w / 2, nh = h / 2;
    std::vector<double> q(static_cast<size_t>(nw) * nh);
    parallel_chunks(nh, [&](long lo, long hi) {
        for (long y = lo; y < hi; ++y) {
            for (int x = 0; x < nw; ++x) {
                const double* r0 = p.data() + (2 * y) * w + 2 * x;
                const double* r1 = r0 + w;
                q[y * nw + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
        }
    });
    p = std::move(q);
    w = nw;
    h = nh;
}

struct ScaleStats {
    double ssim = 0.0; // mean luminance*contrast*structure
    double cs = 0.0;   // mean contrast*structure only
};

// One SSIM scale over grayscale planes; K1=0.01, K2=0.03, L=1.
ScaleStats ssim_scale(const std::vector<double>& x, const std::vector<double>& y, int w, int h) {
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    const std::vector<double> mx = gauss_valid(x, w, h);
    const std::vector<double> my = gauss_valid(y, w, h);
    const std::vector<double> mxx = gauss_valid(mul_planes(x, x), w, h);
    const std::vector<double> myy = gauss_valid(mul_planes(y, y), w, h);
    const std::vector<double> mxy = gauss_valid(mul_planes(x, y), w, h);
    double ssim_sum = 0.0, cs_sum = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double mu1 = mx[i], mu2 = my[i];
        const double s11 = mxx[i] - mu1 * mu1;
        const double s22 = myy[i] - mu2 * mu2;
        const double s12 = mxy[i] - mu1 * mu2;
        const double cs = (2.0 * s12 + C2) / (s11 + s22 + C2);
        const double l = (2.0 * mu1 * mu2 + C1) / (mu1 * mu1 + mu2 * mu2 + C1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    const double n = static_cast<double>(mx.size());
    return {ssim_sum / n, cs_sum / n};
}

double normcdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// One structural-fidelity scale: local std passed through a visibility
// threshold (normal CDF centered on u = 128/(1.4*CSF) with sigma u/3)
// before the similarity quotient; C1=0.01, C2=10.
double tmqi_scale(const std::vector<double>& x, const std::vector<double>& y, int w, int h,
                  double cycles_per_degree) {
    const double f = cycles_per_degree;
    const double csf = 100.0 * 2.6 * (0.0192 + 0.114 * f) * std::exp(-std::pow(0.114 * f, 1.1));
    const double u = 128.0 / (1.4 * csf);
    const double sd = u / 3.0;
    constexpr double C1 = 0.01;
    constexpr double C2 = 10.0;
    const std::vector<double> mx = gauss_valid(x, w, h);
    const std::vector<double> my = gauss_valid(y, w, h);
    const std::vector<double> mxx = gauss_valid(mul_planes(x, x), w, h);
    const std::vector<double> myy = gauss_valid(mul_planes(y, y), w, h);
    const std::vector<double> mxy = gauss_valid(mul_planes(x, y), w, h);
    double sum = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double sx = std::sqrt(std::max(0.0, mxx[i] - mx[i] * mx[i]));
        const double sy = std::sqrt(std::max(0.0, myy[i] - my[i] * my[i]));
        const double sxy = mxy[i] - mx[i] * my[i];
        const double p1 = normcdf((sx - u) / sd);
        const double p2 = normcdf((sy - u) / sd);
        const double sm = ((2.0 * p1 * p2 + C1) / (p1 * p1 + p2 * p2 + C1)) *
                          ((sxy + C2) / (sx * sy + C2));
        sum += sm;
    }
    return sum / static_cast<double>(mx.size());
}

// Mean over non-overlapping 11x11 blocks of the sample standard deviation.
double mean_block_std(const std::vector<double>& p, int w, int h) {
    const int bx = w / 11, by = h / 11;
    double acc = 0.0;
    for (int j = 0; j < by; ++j) {
        for (int i = 0; i < bx; ++i) {
            double mean = 0.0;
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x) mean += p[(11 * j + y) * w + (11 * i + x)];
            mean /= 121.0;
            double ss = 0.0;
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x) {
                    const double d = p[(11 * j + y) * w + (11 * i + x)] - mean;
                    ss += d * d;
                }
            acc += std::sqrt(ss / 120.0);
        }
    }
    return acc / (static_cast<double>(bx) * by);
}

constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

} // namespace

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return capped_db(acc / static_cast<double>(a.data.size()));
}

double mpsnr(const Image& a, const Image& b, const std::vector<double>& stops) {
    require_same_shape(a, b, "mpsnr");
    require_tags(a, Gamut::BT2020, Transfer::PQ, "mpsnr");
    require_tags(b, Gamut::BT2020, Transfer::PQ, "mpsnr");
    if (stops.empty()) throw std::invalid_argument("mpsnr: empty stop list");
    std::vector<double> scale(stops.size());
    for (size_t k = 0; k < stops.size(); ++k) scale[k] = std::exp2(stops[k]);
    std::vector<double> acc(stops.size(), 0.0);
    constexpr double inv_gamma = 1.0 / 2.2;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double la = pq_eotf(a.data[i]);
        const double lb = pq_eotf(b.data[i]);
        for (size_t k = 0; k < stops.size(); ++k) {
            const double ta = std::min(1.0, std::pow(la * scale[k], inv_gamma));
            const double tb = std::min(1.0, std::pow(lb * scale[k], inv_gamma));
            const double d = ta - tb;
            acc[k] += d * d;
        }
    }
    double total = 0.0;
    for (double v : acc) total += v / static_cast<double>(a.data.size());
    return capped_db(total / static_cast<double>(stops.size()));
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (!a.same_tags(b)) throw std::invalid_argument("ssim: tag mismatch");
    if (a.width < 11 || a.height < 11)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const ScaleStats st = ssim_scale(luma_plane(a), luma_plane(b), a.width, a.height);
    // The type invariant pins the value to [0,1]; strongly anticorrelated
    // inputs can drive the raw mean slightly negative.
    return std::clamp(st.ssim, 0.0, 1.0);
}

double ms_ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ms_ssim");
    if (!a.same_tags(b)) throw std::invalid_argument("ms_ssim: tag mismatch");
    if (a.width < 176 || a.height < 176)
        throw std::invalid_argument("ms_ssim: image smaller than 11*2^4");
    std::vector<double> x = luma_plane(a);
    std::vector<double> y = luma_plane(b);
    int w = a.width, h = a.height;
    double prod = 1.0;
    for (int sc = 0; sc < 5; ++sc) {
        const ScaleStats st = ssim_scale(x, y, w, h);
        const double term = (sc == 4) ? st.ssim : st.cs;
        prod *= std::pow(std::max(term, 0.0), kScaleWeights[static_cast<size_t>(sc)]);
        if (sc < 4) {
            int w2 = w, h2 = h;
            downsample2(x, w2, h2);
            downsample2(y, w, h);
        }
    }
    return std::clamp(prod, 0.0, 1.0);
}

double ciede2000_lab(const Lab& c1, const Lab& c2) {
    const double t25 = std::pow(25.0, 7.0);
    const double C1 = std::hypot(c1.a, c1.b);
    const double C2 = std::hypot(c2.a, c2.b);
    const double cbar = 0.5 * (C1 + C2);
    const double cbar7 = std::pow(cbar, 7.0);
    const double G = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + t25)));
    const double a1p = (1.0 + G) * c1.a;
    const double a2p = (1.0 + G) * c2.a;
    const double C1p = std::hypot(a1p, c1.b);
    const double C2p = std::hypot(a2p, c2.b);
    double h1p = (C1p == 0.0) ? 0.0 : std::atan2(c1.b, a1p) * (180.0 / kPi);
    if (h1p < 0.0) h1p += 360.0;
    double h2p = (C2p == 0.0) ? 0.0 : std::atan2(c2.b, a2p) * (180.0 / kPi);
    if (h2p < 0.0) h2p += 360.0;

    const double dLp = c2.L - c1.L;
    const double dCp = C2p - C1p;
    double dhp = 0.0;
    if (C1p * C2p != 0.0) {
        dhp = h2p - h1p;
        if (dhp > 180.0)
            dhp -= 360.0;
        else if (dhp < -180.0)
            dhp += 360.0;
    }
    const double dHp = 2.0 * std::sqrt(C1p * C2p) * std::sin(deg2rad(dhp) * 0.5);

    const double lbar = 0.5 * (c1.L + c2.L);
    const double cbarp = 0.5 * (C1p + C2p);
    double hbarp = h1p + h2p; // the achromatic-case convention
    if (C1p * C2p != 0.0) {
        if (std::abs(h1p - h2p) <= 180.0)
            hbarp = 0.5 * (h1p + h2p);
        else if (h1p + h2p < 360.0)
            hbarp = 0.5 * (h1p + h2p + 360.0);
        else
            hbarp = 0.5 * (h1p + h2p - 360.0);
    }
    const double T = 1.0 - 0.17 * std::cos(deg2rad(hbarp - 30.0)) +
                     0.24 * std::cos(deg2rad(2.0 * hbarp)) +
                     0.32 * std::cos(deg2rad(3.0 * hbarp + 6.0)) -
                     0.20 * std::cos(deg2rad(4.0 * hbarp - 63.0));
    const double dtheta = 30.0 * std::exp(-((hbarp - 275.0) / 25.0) * ((hbarp - 275.0) / 25.0));
    const double cbarp7 = std::pow(cbarp, 7.0);
    const double RC = 2.0 * std::sqrt(cbarp7 / (cbarp7 + t25));
    const double dl50 = lbar - 50.0;
    const double SL = 1.0 + 0.015 * dl50 * dl50 / std::sqrt(20.0 + dl50 * dl50);
    const double SC = 1.0 + 0.045 * cbarp;
    const double SH = 1.0 + 0.015 * cbarp * T;
    const double RT = -std::sin(deg2rad(2.0 * dtheta)) * RC;
    const double tl = dLp / SL;
    const double tc = dCp / SC;
    const double th = dHp / SH;
    return std::sqrt(tl * tl + tc * tc + th * th + RT * tc * th);
}

double ciede2000(const Image& a, const Image& b) {
    require_same_shape(a, b, "ciede2000");
    require_tags(a, Gamut::BT709, Transfer::Gamma709, "ciede2000");
    require_tags(b, Gamut::BT709, Transfer::Gamma709, "ciede2000");
    const Planes pa = rgb_to_lab(a);
    const Planes pb = rgb_to_lab(b);
    const size_t n = pa.a.size();
    std::vector<double> de(n);
    parallel_chunks(static_cast<long>(n), [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const size_t k = static_cast<size_t>(i);
            de[k] = ciede2000_lab({pa.a[k], pa.b[k], pa.c[k]}, {pb.a[k], pb.b[k], pb.c[k]});
        }
    });
    double acc = 0.0;
    for (double v : de) acc += v;
    return acc / static_cast<double>(n);
}

double delta_e_itp(const Image& a, const Image& b) {
    require_same_shape(a, b, "delta_e_itp");
    require_tags(a, Gamut::BT2020, Transfer::PQ, "delta_e_itp");
    require_tags(b, Gamut::BT2020, Transfer::PQ, "delta_e_itp");
    const Planes pa = rgb_to_ictcp(a);
    const Planes pb = rgb_to_ictcp(b);
    double acc = 0.0;
    for (size_t k = 0; k < pa.a.size(); ++k) {
        const double di = pa.a[k] - pb.a[k];
        const double dt = 0.5 * (pa.b[k] - pb.b[k]); // T = Ct/2
        const double dp = pa.c[k] - pb.c[k];
        acc += 720.0 * std::sqrt(di * di + dt * dt + dp * dp);
    }
    return acc / static_cast<double>(pa.a.size());
}

TmqiResult tmqi(const Image& hdr, const Image& sdr) {
    require_same_shape(hdr, sdr, "tmqi");
    require_tags(hdr, Gamut::BT2020, Transfer::PQ, "tmqi");
    require_tags(sdr, Gamut::BT709, Transfer::Gamma709, "tmqi");
    if (hdr.width < 176 || hdr.height < 176)
        throw std::invalid_argument("tmqi: image smaller than 11*2^4");
    const long n = hdr.pixels();

    // HDR luminance, affinely spread over the full 32-bit range the
    // structural model was calibrated for; SDR luma on the 8-bit scale.
    std::vector<double> lh(static_cast<size_t>(n));
    parallel_chunks(n, [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = hdr.data.data() + 3 * i;
            lh[static_cast<size_t>(i)] =
                bt2020_luminance({pq_eotf(p[0]), pq_eotf(p[1]), pq_eotf(p[2])});
        }
    });
    double lmin = lh[0], lmax = lh[0];
    for (double v : lh) {
        lmin = std::min(lmin, v);
        lmax = std::max(lmax, v);
    }
    const double span = lmax - lmin;
    const double gain = (span > 0.0) ? (4294967295.0 / span) : 0.0;
    for (double& v : lh) v = (v - lmin) * gain;

    std::vector<double> ls(static_cast<size_t>(n));
    parallel_chunks(n, [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const float* p = sdr.data.data() + 3 * i;
            ls[static_cast<size_t>(i)] = 255.0 * (0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]);
        }
    });

    // Structural fidelity across five dyadic scales (16 down to 1 cpd).
    double prod = 1.0;
    {
        std::vector<double> x = lh, y = ls;
        int w = hdr.width, h = hdr.height;
        const std::array<double, 5> cpd = {16.0, 8.0, 4.0, 2.0, 1.0};
        for (int sc = 0; sc < 5; ++sc) {
            const double sl = tmqi_scale(x, y, w, h, cpd[static_cast<size_t>(sc)]);
            prod *= std::pow(std::max(sl, 0.0), kScaleWeights[static_cast<size_t>(sc)]);
            if (sc < 4) {
                int w2 = w, h2 = h;
                downsample2(x, w2, h2);
                downsample2(y, w, h);
            }
        }
    }
    const double S = std::clamp(prod, 0.0, 1.0);

    // Statistical naturalness: brightness prior (Gaussian over the mean)
    // times a contrast prior (Beta(4.4,10.1) over mean block std / 64.29),
    // each normalized to peak 1.
    double usum = 0.0;
    for (double v : ls) usum += v;
    const double umean = usum / static_cast<double>(n);
    const double sig = mean_block_std(ls, sdr.width, sdr.height);
    const double pu = std::exp(-(umean - 115.94) * (umean - 115.94) / (2.0 * 27.99 * 27.99));
    const double xm = 3.4 / 12.5; // Beta mode
    const double pd_peak = std::pow(xm, 3.4) * std::pow(1.0 - xm, 9.1);
    const double xs = std::clamp(sig / 64.29, 0.0, 1.0);
    const double pd = std::pow(xs, 3.4) * std::pow(1.0 - xs, 9.1) / pd_peak;
    const double N = std::clamp(pu * pd, 0.0, 1.0);

    TmqiResult r;
    r.s = S;
    r.n = N;
    r.q = 0.8012 * std::pow(S, 0.3046) + 0.1988 * std::pow(N, 0.7088);
    return r;
}

std::vector<TmoAnalysisRow> analyze_tmos(const std::vector<Image>& hdr_set,
                                         const std::vector<Image>& gt_sdr_set,
                                         const std::vector<std::string>& tmos,
                                         const TmoOptions& opt) {
    if (hdr_set.empty() || hdr_set.size() != gt_sdr_set.size())
        throw std::invalid_argument("analyze_tmos: unpaired sets");
    if (tmos.empty()) throw std::invalid_argument("analyze_tmos: empty operator list");
    std::vector<TmoAnalysisRow> rows;
    rows.reserve(tmos.size());
    for (const std::string& name : tmos) {
        double sum_t = 0.0, sum_p = 0.0, sum_c = 0.0;
        for (size_t i = 0; i < hdr_set.size(); ++i) {
            const Image mapped = apply_tmo(name, hdr_set[i], opt);
            sum_t += tmqi(hdr_set[i], mapped).q;
            sum_p += psnr(mapped, gt_sdr_set[i]);
            sum_c += ciede2000(mapped, gt_sdr_set[i]);
        }
        const double k = static_cast<double>(hdr_set.size());
        rows.push_back({name, sum_t / k, sum_p / k, sum_c / k});
    }
    return rows;
}

} // namespace hdrsynth
