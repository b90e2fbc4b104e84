#pragma once

#include "hdrsynth/colorimetry.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace hdrsynth {

// Cubic lattice of RGB output samples. Addressing is red-fastest:
// sample index = (b*size + g)*size + r, each entry 3 floats.
struct Lut3D {
    int size = 0;
    std::array<double, 3> domain_min{0.0, 0.0, 0.0};
    std::array<double, 3> domain_max{1.0, 1.0, 1.0};
    std::vector<float> samples; // size^3 * 3

    const float* at(int r, int g, int b) const {
        return samples.data() + 3 * (static_cast<size_t>(b) * size * size +
                                     static_cast<size_t>(g) * size + r);
    }
    float* at(int r, int g, int b) {
        return samples.data() + 3 * (static_cast<size_t>(b) * size * size +
                                     static_cast<size_t>(g) * size + r);
    }

    // Trilinear interpolation of an input in the [0,1]^3 domain.
    Rgb sample(const Rgb& in) const;
};

// .cube text format: optional TITLE / DOMAIN_MIN / DOMAIN_MAX lines,
// LUT_3D_SIZE N, then N^3 "r g b" rows (red fastest). '#' comments and
// blank lines are skipped. Samples must be finite and in [0,1].
Lut3D lut_load(const std::filesystem::path& path);
void lut_save(const Lut3D& lut, const std::filesystem::path& path); // 6 decimals

Lut3D make_identity_lut(int n); // throws if n < 2

// Samples `op` (a full pixel map from input code values to output code
// values) on the lattice. Applying the result agrees with `op` up to
// trilinear interpolation error.
using PixelCurve = std::function<Rgb(const Rgb&)>;
Lut3D bake_lut(const PixelCurve& op, int n);

} // namespace hdrsynth
