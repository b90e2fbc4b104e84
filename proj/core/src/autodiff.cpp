#include "hdrsynth/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace hdrsynth::ad {

namespace {

[[noreturn]] void fail(const char* what) { throw std::runtime_error(what); }

int out_extent(int in, int k, int stride, Pad pad) {
    int eff = pad == Pad::Reflect ? in + (k - 1) : in;
    if (eff < k) fail("conv2d: input smaller than kernel");
    return (eff - k) / stride + 1;
}

// Mirror index without repeating the edge sample: -1 -> 1, n -> n-2.
inline int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

Tensor pad_reflect(const Tensor& x, int p) {
    if (x.h <= p || x.w <= p) fail("conv2d: image too small for reflection pad");
    Tensor xp(x.n, x.c, x.h + 2 * p, x.w + 2 * p);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* src = x.ptr(n, c);
            double* dst = xp.ptr(n, c);
            for (int y = 0; y < xp.h; ++y) {
                int sy = reflect(y - p, x.h);
                for (int xx = 0; xx < xp.w; ++xx)
                    dst[static_cast<size_t>(y) * xp.w + xx] =
                        src[static_cast<size_t>(sy) * x.w + reflect(xx - p, x.w)];
            }
        }
    return xp;
}

void unpad_reflect_add(const Tensor& dxp, int p, Tensor& dx) {
    for (int n = 0; n < dx.n; ++n)
        for (int c = 0; c < dx.c; ++c) {
            const double* src = dxp.ptr(n, c);
            double* dst = dx.ptr(n, c);
            for (int y = 0; y < dxp.h; ++y) {
                int sy = reflect(y - p, dx.h);
                for (int xx = 0; xx < dxp.w; ++xx)
                    dst[static_cast<size_t>(sy) * dx.w + reflect(xx - p, dx.w)] +=
                        src[static_cast<size_t>(y) * dxp.w + xx];
            }
        }
}

// cols is (Cin*kh*kw) x (oh*ow) for one batch item of the padded input.
void im2col(const Tensor& xp, int item, int kh, int kw, int stride, int oh, int ow,
            std::vector<double>& cols) {
    const long ohw = static_cast<long>(oh) * ow;
    cols.resize(static_cast<size_t>(xp.c) * kh * kw * ohw);
    double* out = cols.data();
    for (int c = 0; c < xp.c; ++c) {
        const double* src = xp.ptr(item, c);
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    const double* row = src + static_cast<size_t>(oy * stride + ky) * xp.w + kx;
                    if (stride == 1) {
                        for (int ox = 0; ox < ow; ++ox) out[ox] = row[ox];
                    } else {
                        for (int ox = 0; ox < ow; ++ox) out[ox] = row[static_cast<long>(ox) * stride];
                    }
                    out += ow;
                }
            }
    }
}

void col2im_add(const std::vector<double>& cols, Tensor& xp, int item, int kh, int kw, int stride,
                int oh, int ow) {
    const double* in = cols.data();
    for (int c = 0; c < xp.c; ++c) {
        double* dst = xp.ptr(item, c);
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    double* row = dst + static_cast<size_t>(oy * stride + ky) * xp.w + kx;
                    if (stride == 1) {
                        for (int ox = 0; ox < ow; ++ox) row[ox] += in[ox];
                    } else {
                        for (int ox = 0; ox < ow; ++ox) row[static_cast<long>(ox) * stride] += in[ox];
                    }
                    in += ow;
                }
            }
    }
}

// C(M x N) += A(M x K) * B(K x N), all row-major contiguous.
void gemm_nn(long M, long N, long K, const double* A, const double* B, double* C) {
    for (long m = 0; m < M; ++m) {
        double* crow = C + m * N;
        const double* arow = A + m * K;
        for (long k = 0; k < K; ++k) {
            double a = arow[k];
            if (a == 0.0) continue;
            const double* brow = B + k * N;
            for (long j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

// C(M x N) += A(M x K) * B(N x K)^T  (rows of both operands contiguous).
void gemm_nt(long M, long N, long K, const double* A, const double* B, double* C) {
    for (long m = 0; m < M; ++m) {
        const double* arow = A + m * K;
        double* crow = C + m * N;
        for (long j = 0; j < N; ++j) {
            const double* brow = B + j * K;
            double acc = 0.0;
            for (long k = 0; k < K; ++k) acc += arow[k] * brow[k];
            crow[j] += acc;
        }
    }
}

struct ConvShape {
    int kh, kw, p, oh, ow;
    long ohw, kdim;
};

ConvShape conv_shape(const Tensor& x, const Tensor& w, int stride, Pad pad) {
    if (x.c != w.c) fail("conv2d: channel mismatch");
    if (stride < 1) fail("conv2d: bad stride");
    ConvShape s;
    s.kh = w.h;
    s.kw = w.w;
    s.p = pad == Pad::Reflect ? (w.h - 1) / 2 : 0;
    s.oh = out_extent(x.h, w.h, stride, pad);
    s.ow = out_extent(x.w, w.w, stride, pad);
    s.ohw = static_cast<long>(s.oh) * s.ow;
    s.kdim = static_cast<long>(w.c) * w.h * w.w;
    return s;
}

} // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b, int stride, Pad pad) {
    ConvShape s = conv_shape(x, w, stride, pad);
    if (b && (b->c != w.n || b->n != 1 || b->h != 1 || b->w != 1))
        fail("conv2d: bias shape mismatch");
    Tensor xp = s.p > 0 ? pad_reflect(x, s.p) : x;
    Tensor y(x.n, w.n, s.oh, s.ow);
    std::vector<double> cols;
    for (int item = 0; item < x.n; ++item) {
        im2col(xp, item, s.kh, s.kw, stride, s.oh, s.ow, cols);
        double* out = y.ptr(item, 0);
        if (b) {
            for (int co = 0; co < w.n; ++co) {
                double bias = b->v[static_cast<size_t>(co)];
                double* row = out + static_cast<size_t>(co) * s.ohw;
                for (long t = 0; t < s.ohw; ++t) row[t] = bias;
            }
        }
        gemm_nn(w.n, s.ohw, s.kdim, w.v.data(), cols.data(), out);
    }
    return y;
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, int stride, Pad pad,
                            const Tensor& dy, bool need_dx, bool need_dw) {
    ConvShape s = conv_shape(x, w, stride, pad);
    if (dy.n != x.n || dy.c != w.n || dy.h != s.oh || dy.w != s.ow)
        fail("conv2d_backward: dy shape mismatch");

    Conv2dGrads g;
    g.db = Tensor(1, w.n, 1, 1);
    for (int item = 0; item < dy.n; ++item)
        for (int co = 0; co < w.n; ++co) {
            const double* row = dy.ptr(item, co);
            double acc = 0.0;
            for (long t = 0; t < s.ohw; ++t) acc += row[t];
            g.db.v[static_cast<size_t>(co)] += acc;
        }

    std::vector<double> cols;
    Tensor xp;
    if (need_dw) {
        g.dw = Tensor(w.n, w.c, w.h, w.w);
        xp = s.p > 0 ? pad_reflect(x, s.p) : x;
    }
    Tensor dxp;
    std::vector<double> wt; // w transposed to (kdim x Cout) for the dx GEMM
    if (need_dx) {
        g.dx = Tensor(x.n, x.c, x.h, x.w);
        dxp = Tensor(x.n, x.c, x.h + 2 * s.p, x.w + 2 * s.p);
        wt.resize(static_cast<size_t>(s.kdim) * w.n);
        for (int co = 0; co < w.n; ++co)
            for (long k = 0; k < s.kdim; ++k)
                wt[static_cast<size_t>(k) * w.n + co] = w.v[static_cast<size_t>(co) * s.kdim + k];
    }

    std::vector<double> dcols;
    for (int item = 0; item < x.n; ++item) {
        if (need_dw) {
            im2col(xp, item, s.kh, s.kw, stride, s.oh, s.ow, cols);
            // dW(Cout x kdim) += dy_item(Cout x ohw) * cols(kdim x ohw)^T
            gemm_nt(w.n, s.kdim, s.ohw, dy.ptr(item, 0), cols.data(), g.dw.v.data());
        }
        if (need_dx) {
            dcols.assign(static_cast<size_t>(s.kdim) * s.ohw, 0.0);
            // dcols(kdim x ohw) = w^T(kdim x Cout) * dy_item(Cout x ohw)
            gemm_nn(s.kdim, s.ohw, w.n, wt.data(), dy.ptr(item, 0), dcols.data());
            col2im_add(dcols, dxp, item, s.kh, s.kw, stride, s.oh, s.ow);
        }
    }
    if (need_dx) {
        if (s.p > 0)
            unpad_reflect_add(dxp, s.p, g.dx);
        else
            g.dx.v = std::move(dxp.v);
    }
    return g;
}

Graph::Node* Graph::make(Tensor v, bool needs_grad) {
    auto node = std::make_unique<Node>();
    node->val = std::move(v);
    node->needs_grad = needs_grad;
    if (needs_grad)
        node->grad = Tensor(node->val.n, node->val.c, node->val.h, node->val.w);
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

Graph::Node* Graph::input(Tensor v, bool needs_grad) { return make(std::move(v), needs_grad); }

Graph::Node* Graph::conv2d(Node* x, Node* w, Node* b, int stride, Pad pad) {
    Tensor y = conv2d_forward(x->val, w->val, b ? &b->val : nullptr, stride, pad);
    bool ng = x->needs_grad || w->needs_grad || (b && b->needs_grad);
    Node* out = make(std::move(y), ng);
    if (!ng) return out;
    tape_.push_back([x, w, b, stride, pad, out] {
        Conv2dGrads g = conv2d_backward(x->val, w->val, stride, pad, out->grad, x->needs_grad,
                                        w->needs_grad);
        if (x->needs_grad)
            for (long i = 0; i < g.dx.size(); ++i)
                x->grad.v[static_cast<size_t>(i)] += g.dx.v[static_cast<size_t>(i)];
        if (w->needs_grad)
            for (long i = 0; i < g.dw.size(); ++i)
                w->grad.v[static_cast<size_t>(i)] += g.dw.v[static_cast<size_t>(i)];
        if (b && b->needs_grad)
            for (long i = 0; i < g.db.size(); ++i)
                b->grad.v[static_cast<size_t>(i)] += g.db.v[static_cast<size_t>(i)];
    });
    return out;
}

Graph::Node* Graph::leaky_relu(Node* x, double slope) {
    Tensor y = x->val;
    for (double& v : y.v)
        if (v < 0.0) v *= slope;
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out, slope] {
        for (long i = 0; i < x->val.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            x->grad.v[k] += out->grad.v[k] * (x->val.v[k] < 0.0 ? slope : 1.0);
        }
    });
    return out;
}

Graph::Node* Graph::sigmoid(Node* x) {
    Tensor y = x->val;
    for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out] {
        for (long i = 0; i < x->val.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            double s = out->val.v[k];
            x->grad.v[k] += out->grad.v[k] * s * (1.0 - s);
        }
    });
    return out;
}

Graph::Node* Graph::add(Node* x, Node* y) {
    if (!x->val.same_shape(y->val)) fail("add: shape mismatch");
    Tensor z = x->val;
    for (long i = 0; i < z.size(); ++i) z.v[static_cast<size_t>(i)] += y->val.v[static_cast<size_t>(i)];
    Node* out = make(std::move(z), x->needs_grad || y->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, y, out] {
        if (x->needs_grad)
            for (long i = 0; i < out->grad.size(); ++i)
                x->grad.v[static_cast<size_t>(i)] += out->grad.v[static_cast<size_t>(i)];
        if (y->needs_grad)
            for (long i = 0; i < out->grad.size(); ++i)
                y->grad.v[static_cast<size_t>(i)] += out->grad.v[static_cast<size_t>(i)];
    });
    return out;
}

Graph::Node* Graph::mul(Node* x, Node* y) {
    if (!x->val.same_shape(y->val)) fail("mul: shape mismatch");
    Tensor z = x->val;
    for (long i = 0; i < z.size(); ++i) z.v[static_cast<size_t>(i)] *= y->val.v[static_cast<size_t>(i)];
    Node* out = make(std::move(z), x->needs_grad || y->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, y, out] {
        for (long i = 0; i < out->grad.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            if (x->needs_grad) x->grad.v[k] += out->grad.v[k] * y->val.v[k];
            if (y->needs_grad) y->grad.v[k] += out->grad.v[k] * x->val.v[k];
        }
    });
    return out;
}

Graph::Node* Graph::scale(Node* x, double a) {
    Tensor y = x->val;
    for (double& v : y.v) v *= a;
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out, a] {
        for (long i = 0; i < out->grad.size(); ++i)
            x->grad.v[static_cast<size_t>(i)] += out->grad.v[static_cast<size_t>(i)] * a;
    });
    return out;
}

Graph::Node* Graph::slice_channels(Node* x, int begin, int end) {
    if (begin < 0 || end <= begin || end > x->val.c) fail("slice_channels: bad range");
    Tensor y(x->val.n, end - begin, x->val.h, x->val.w);
    const long plane = x->val.plane();
    for (int n = 0; n < y.n; ++n)
        for (int c = 0; c < y.c; ++c)
            std::copy_n(x->val.ptr(n, begin + c), plane, y.ptr(n, c));
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out, begin, plane] {
        for (int n = 0; n < out->grad.n; ++n)
            for (int c = 0; c < out->grad.c; ++c) {
                const double* src = out->grad.ptr(n, c);
                double* dst = x->grad.ptr(n, begin + c);
                for (long i = 0; i < plane; ++i) dst[i] += src[i];
            }
    });
    return out;
}

Graph::Node* Graph::slice_spatial(Node* x, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > x->val.h || x0 + w > x->val.w)
        fail("slice_spatial: window out of bounds");
    Tensor y(x->val.n, x->val.c, h, w);
    for (int n = 0; n < y.n; ++n)
        for (int c = 0; c < y.c; ++c) {
            const double* src = x->val.ptr(n, c) + static_cast<size_t>(y0) * x->val.w + x0;
            double* dst = y.ptr(n, c);
            for (int yy = 0; yy < h; ++yy)
                std::copy_n(src + static_cast<size_t>(yy) * x->val.w, w,
                            dst + static_cast<size_t>(yy) * w);
        }
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out, y0, x0, h, w] {
        for (int n = 0; n < out->grad.n; ++n)
            for (int c = 0; c < out->grad.c; ++c) {
                const double* src = out->grad.ptr(n, c);
                double* dst = x->grad.ptr(n, c) + static_cast<size_t>(y0) * x->grad.w + x0;
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        dst[static_cast<size_t>(yy) * x->grad.w + xx] +=
                            src[static_cast<size_t>(yy) * w + xx];
            }
    });
    return out;
}

Graph::Node* Graph::global_avg_pool(Node* x) {
    Tensor y(x->val.n, x->val.c, 1, 1);
    const long plane = x->val.plane();
    for (int n = 0; n < x->val.n; ++n)
        for (int c = 0; c < x->val.c; ++c) {
            const double* src = x->val.ptr(n, c);
            double acc = 0.0;
            for (long i = 0; i < plane; ++i) acc += src[i];
            y.at(n, c, 0, 0) = acc / static_cast<double>(plane);
        }
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out, plane] {
        double inv = 1.0 / static_cast<double>(plane);
        for (int n = 0; n < x->grad.n; ++n)
            for (int c = 0; c < x->grad.c; ++c) {
                double g = out->grad.at(n, c, 0, 0) * inv;
                double* dst = x->grad.ptr(n, c);
                for (long i = 0; i < plane; ++i) dst[i] += g;
            }
    });
    return out;
}

Graph::Node* Graph::linear(Node* x, Node* w, Node* b) {
    if (x->val.h != 1 || x->val.w != 1 || w->val.c != x->val.c || w->val.h != 1 || w->val.w != 1)
        fail("linear: shape mismatch");
    if (b && (b->val.c != w->val.n || b->val.n != 1)) fail("linear: bias shape mismatch");
    const int N = x->val.n, C = x->val.c, M = w->val.n;
    Tensor y(N, M, 1, 1);
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
            double acc = b ? b->val.v[static_cast<size_t>(m)] : 0.0;
            const double* wr = w->val.v.data() + static_cast<size_t>(m) * C;
            const double* xr = x->val.v.data() + static_cast<size_t>(n) * C;
            for (int c = 0; c < C; ++c) acc += wr[c] * xr[c];
            y.v[static_cast<size_t>(n) * M + m] = acc;
        }
    bool ng = x->needs_grad || w->needs_grad || (b && b->needs_grad);
    Node* out = make(std::move(y), ng);
    if (!ng) return out;
    tape_.push_back([x, w, b, out, N, C, M] {
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m) {
                double g = out->grad.v[static_cast<size_t>(n) * M + m];
                if (g == 0.0) continue;
                if (x->needs_grad) {
                    const double* wr = w->val.v.data() + static_cast<size_t>(m) * C;
                    double* xg = x->grad.v.data() + static_cast<size_t>(n) * C;
                    for (int c = 0; c < C; ++c) xg[c] += g * wr[c];
                }
                if (w->needs_grad) {
                    const double* xr = x->val.v.data() + static_cast<size_t>(n) * C;
                    double* wg = w->grad.v.data() + static_cast<size_t>(m) * C;
                    for (int c = 0; c < C; ++c) wg[c] += g * xr[c];
                }
                if (b && b->needs_grad) b->grad.v[static_cast<size_t>(m)] += g;
            }
    });
    return out;
}

Graph::Node* Graph::channel_affine(Node* x, Node* s, Node* t) {
    if (s->val.n != x->val.n || s->val.c != x->val.c || s->val.h != 1 || s->val.w != 1 ||
        !s->val.same_shape(t->val))
        fail("channel_affine: shape mismatch");
    Tensor y = x->val;
    const long plane = x->val.plane();
    for (int n = 0; n < y.n; ++n)
        for (int c = 0; c < y.c; ++c) {
            double sv = s->val.at(n, c, 0, 0), tv = t->val.at(n, c, 0, 0);
            double* row = y.ptr(n, c);
            for (long i = 0; i < plane; ++i) row[i] = row[i] * sv + tv;
        }
    bool ng = x->needs_grad || s->needs_grad || t->needs_grad;
    Node* out = make(std::move(y), ng);
    if (!ng) return out;
    tape_.push_back([x, s, t, out, plane] {
        for (int n = 0; n < out->grad.n; ++n)
            for (int c = 0; c < out->grad.c; ++c) {
                const double* g = out->grad.ptr(n, c);
                if (x->needs_grad) {
                    double sv = s->val.at(n, c, 0, 0);
                    double* dst = x->grad.ptr(n, c);
                    for (long i = 0; i < plane; ++i) dst[i] += g[i] * sv;
                }
                if (s->needs_grad) {
                    const double* xv = x->val.ptr(n, c);
                    double acc = 0.0;
                    for (long i = 0; i < plane; ++i) acc += g[i] * xv[i];
                    s->grad.at(n, c, 0, 0) += acc;
                }
                if (t->needs_grad) {
                    double acc = 0.0;
                    for (long i = 0; i < plane; ++i) acc += g[i];
                    t->grad.at(n, c, 0, 0) += acc;
                }
            }
    });
    return out;
}

Graph::Node* Graph::l1_mean(Node* x, Tensor target) {
    if (!x->val.same_shape(target)) fail("l1_mean: shape mismatch");
    double acc = 0.0;
    for (long i = 0; i < x->val.size(); ++i)
        acc += std::fabs(x->val.v[static_cast<size_t>(i)] - target.v[static_cast<size_t>(i)]);
    Tensor y(1, 1, 1, 1);
    y.v[0] = acc / static_cast<double>(x->val.size());
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    auto shared = std::make_shared<Tensor>(std::move(target));
    tape_.push_back([x, out, shared] {
        double g = out->grad.v[0] / static_cast<double>(x->val.size());
        for (long i = 0; i < x->val.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            double d = x->val.v[k] - shared->v[k];
            x->grad.v[k] += d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
        }
    });
    return out;
}

Graph::Node* Graph::lsq_mean(Node* x, double target) {
    if (x->val.size() == 0) fail("lsq_mean: empty tensor");
    double acc = 0.0;
    for (double v : x->val.v) {
        double d = v - target;
        acc += d * d;
    }
    Tensor y(1, 1, 1, 1);
    y.v[0] = 0.5 * acc / static_cast<double>(x->val.size());
    Node* out = make(std::move(y), x->needs_grad);
    if (!out->needs_grad) return out;
    tape_.push_back([x, out, target] {
        double g = out->grad.v[0] / static_cast<double>(x->val.size());
        for (long i = 0; i < x->val.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            x->grad.v[k] += g * (x->val.v[k] - target);
        }
    });
    return out;
}

void Graph::backward(Node* loss) {
    if (loss->val.size() != 1) fail("backward: loss must be scalar");
    if (!loss->needs_grad) fail("backward: loss does not depend on any gradient input");
    loss->grad.v[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

} // namespace hdrsynth::ad
