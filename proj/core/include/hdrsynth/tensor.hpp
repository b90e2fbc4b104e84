#pragma once

#include <cstdint>
#include <vector>

namespace hdrsynth {

// Dense NCHW tensor, contiguous row-major doubles.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

    long size() const { return static_cast<long>(n) * c * h * w; }
    long plane() const { return static_cast<long>(h) * w; }

    double& at(int i, int j, int y, int x) {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }
    double at(int i, int j, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }
    double* ptr(int i, int j) { return v.data() + (static_cast<size_t>(i) * c + j) * plane(); }
    const double* ptr(int i, int j) const {
        return v.data() + (static_cast<size_t>(i) * c + j) * plane();
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    bool all_finite() const;
};

} // namespace hdrsynth
