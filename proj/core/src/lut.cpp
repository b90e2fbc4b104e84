#include "hdrsynth/lut.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hdrsynth {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

} // namespace

Rgb Lut3D::sample(const Rgb& in) const {
    const int n = size;
    double frac[3];
    int i0[3];
    for (int c = 0; c < 3; ++c) {
        double v = std::clamp(in[static_cast<size_t>(c)], 0.0, 1.0) * (n - 1);
        int lo = static_cast<int>(std::floor(v));
        if (lo > n - 2) lo = n - 2;
        i0[c] = lo;
        frac[c] = v - lo;
    }
    Rgb out{0.0, 0.0, 0.0};
    for (int db = 0; db < 2; ++db) {
        double wb = db ? frac[2] : 1.0 - frac[2];
        for (int dg = 0; dg < 2; ++dg) {
            double wg = dg ? frac[1] : 1.0 - frac[1];
            for (int dr = 0; dr < 2; ++dr) {
                double wr = dr ? frac[0] : 1.0 - frac[0];
                const float* s = at(i0[0] + dr, i0[1] + dg, i0[2] + db);
                double w = wr * wg * wb;
                out[0] += w * s[0];
                out[1] += w * s[1];
                out[2] += w * s[2];
            }
        }
    }
    return out;
}

Lut3D lut_load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path.string());

    Lut3D lut;
    std::string line;
    long expected = -1;
    long got = 0;
    while (std::getline(in, line)) {
        // Strip comments and surrounding whitespace.
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;

        if (tok == "TITLE") {
            continue;
        } else if (tok == "DOMAIN_MIN" || tok == "DOMAIN_MAX") {
            auto& d = tok == "DOMAIN_MIN" ? lut.domain_min : lut.domain_max;
            if (!(ls >> d[0] >> d[1] >> d[2])) fail("bad " + tok + " line: " + path.string());
        } else if (tok == "LUT_3D_SIZE") {
            if (!(ls >> lut.size) || lut.size < 2) fail("bad LUT_3D_SIZE: " + path.string());
            expected = static_cast<long>(lut.size) * lut.size * lut.size;
            lut.samples.reserve(static_cast<size_t>(expected) * 3);
        } else {
            if (expected < 0) fail("sample row before LUT_3D_SIZE: " + path.string());
            float r, g, b;
            std::istringstream row(line);
            if (!(row >> r >> g >> b)) fail("bad sample row: " + path.string());
            for (float v : {r, g, b}) {
                if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                    fail("sample out of [0,1]: " + path.string());
                lut.samples.push_back(v);
            }
            ++got;
        }
    }
    if (expected < 0) fail("missing LUT_3D_SIZE: " + path.string());
    if (got != expected)
        fail("expected " + std::to_string(expected) + " sample rows, got " + std::to_string(got) +
             ": " + path.string());
    return lut;
}

void lut_save(const Lut3D& lut, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path.string());
    out << "TITLE \"hdrsynth\"\n";
    char buf[80];
    std::snprintf(buf, sizeof buf, "DOMAIN_MIN %.6f %.6f %.6f\n", lut.domain_min[0],
                  lut.domain_min[1], lut.domain_min[2]);
    out << buf;
    std::snprintf(buf, sizeof buf, "DOMAIN_MAX %.6f %.6f %.6f\n", lut.domain_max[0],
                  lut.domain_max[1], lut.domain_max[2]);
    out << buf;
    out << "LUT_3D_SIZE " << lut.size << "\n";
    const long n = static_cast<long>(lut.samples.size()) / 3;
    for (long i = 0; i < n; ++i) {
        const float* s = lut.samples.data() + 3 * i;
        std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f\n", static_cast<double>(s[0]),
                      static_cast<double>(s[1]), static_cast<double>(s[2]));
        out << buf;
    }
    if (!out) fail("write failed: " + path.string());
}

Lut3D make_identity_lut(int n) {
    if (n < 2) fail("make_identity_lut: size must be >= 2");
    Lut3D lut;
    lut.size = n;
    lut.samples.resize(static_cast<size_t>(n) * n * n * 3);
    const double step = 1.0 / (n - 1);
    for (int b = 0; b < n; ++b)
        for (int g = 0; g < n; ++g)
            for (int r = 0; r < n; ++r) {
                float* s = lut.at(r, g, b);
                s[0] = static_cast<float>(r * step);
                s[1] = static_cast<float>(g * step);
                s[2] = static_cast<float>(b * step);
            }
    return lut;
}

Lut3D bake_lut(const PixelCurve& op, int n) {
    if (n < 2) fail("bake_lut: size must be >= 2");
    Lut3D lut;
    lut.size = n;
    lut.samples.resize(static_cast<size_t>(n) * n * n * 3);
    const double step = 1.0 / (n - 1);
    for (int b = 0; b < n; ++b)
        for (int g = 0; g < n; ++g)
            for (int r = 0; r < n; ++r) {
                Rgb out = op({r * step, g * step, b * step});
                float* s = lut.at(r, g, b);
                for (int c = 0; c < 3; ++c)
                    s[c] = static_cast<float>(std::clamp(out[static_cast<size_t>(c)], 0.0, 1.0));
            }
    return lut;
}

} // namespace hdrsynth
