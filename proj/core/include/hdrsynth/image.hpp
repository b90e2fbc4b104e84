#pragma once

#include "hdrsynth/colorimetry.hpp"

#include <filesystem>
#include <vector>

namespace hdrsynth {

// Interleaved RGB float image, normalized code values. Values outside [0,1]
// are permitted only for Transfer::Linear (scene-referred intermediates).
struct Image {
    int width = 0;
    int height = 0;
    Gamut gamut = Gamut::BT709;
    Transfer transfer = Transfer::Gamma709;
    std::vector<float> data; // width*height*3, row-major

    Image() = default;
    Image(int w, int h, Gamut g, Transfer t)
        : width(w), height(h), gamut(g), transfer(t),
          data(static_cast<size_t>(w) * h * 3, 0.0f) {}

    float* px(int x, int y) { return data.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const float* px(int x, int y) const {
        return data.data() + 3 * (static_cast<size_t>(y) * width + x);
    }
    long pixels() const { return static_cast<long>(width) * height; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
    bool same_tags(const Image& o) const { return gamut == o.gamut && transfer == o.transfer; }
};

// Enforces the Image invariants: data length, finiteness, and clamping to
// [0,1] for encoded transfers. Throws std::runtime_error on NaN/Inf.
Image sanitize(Image img);

// PNG (8/16-bit RGB) or PFM (float, ".pfm"), chosen by extension.
// PNG integer codes are scaled by 1/(2^bits - 1). Throws on I/O or
// format errors with a one-line message.
Image load_image(const std::filesystem::path& path, Gamut gamut, Transfer transfer);

// PNG: rounds clamp(v)*(2^bits - 1) half-up. PFM (".pfm"): raw float, bits
// ignored. Throws on I/O errors.
void save_image(const Image& img, const std::filesystem::path& path, int bits = 16);

Image crop(const Image& img, int x0, int y0, int w, int h); // throws if out of bounds

// Translates by (dx,dy): out(x,y) = img(x-dx, y-dy), zero outside.
Image shift(const Image& img, int dx, int dy);

struct Offset2D {
    int dx = 0;
    int dy = 0;
};

struct AlignResult {
    Offset2D offset;
    double residual_mse = 0.0; // per-sample MSE over the overlap at the optimum
};

// Exhaustive integer-offset search: picks (dx,dy) with |dx|,|dy| <= radius
// minimizing MSE of shift(a,(dx,dy)) against b over their overlap. Ties go
// to smaller |dx|+|dy|, then smaller dy, then smaller dx. Throws if the
// overlap at maximal shift would be under 16x16 pixels.
AlignResult align_translation(const Image& a, const Image& b, int radius);

// Three double-precision planes sharing one geometry (Lab or ICtCp).
struct Planes {
    int width = 0;
    int height = 0;
    std::vector<double> a, b, c;
};

// Image-level color conversions. Each checks the input tags and throws
// std::runtime_error on a mismatch.
Image cgm(const Image& h);          // BT2020+PQ -> BT709+Gamma709, per-pixel cgm_pixel
Planes rgb_to_lab(const Image& s);  // BT709+Gamma709 -> CIE Lab (D65)
Planes rgb_to_ictcp(const Image& h); // BT2020+PQ -> ICtCp

} // namespace hdrsynth
