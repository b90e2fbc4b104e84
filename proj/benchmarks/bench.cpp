#include <benchmark/benchmark.h>

#include "hdrsynth/autodiff.hpp"
#include "hdrsynth/htmp.hpp"
#include "hdrsynth/metrics.hpp"
#include "hdrsynth/tmo.hpp"

#include <random>

using namespace hdrsynth;

namespace {

Image random_hdr(int w, int h, uint32_t seed) {
    Image img(w, h, Gamut::BT2020, Transfer::PQ);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (float& v : img.data) v = dist(rng);
    return img;
}

Tensor random_tensor(int n, int c, int h, int w, uint32_t seed) {
    Tensor t(n, c, h, w);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : t.v) v = dist(rng);
    return t;
}

} // namespace

static void BM_PqEotf(benchmark::State& state) {
    std::vector<double> codes(4096);
    for (size_t i = 0; i < codes.size(); ++i) codes[i] = double(i) / 4095.0;
    for (auto _ : state) {
        double acc = 0.0;
        for (double c : codes) acc += pq_eotf(c);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * int64_t(codes.size()));
}
BENCHMARK(BM_PqEotf);

static void BM_PqOetf(benchmark::State& state) {
    std::vector<double> lin(4096);
    for (size_t i = 0; i < lin.size(); ++i) lin[i] = double(i) / 4095.0;
    for (auto _ : state) {
        double acc = 0.0;
        for (double l : lin) acc += pq_oetf(l);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * int64_t(lin.size()));
}
BENCHMARK(BM_PqOetf);

static void BM_CgmPixel(benchmark::State& state) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<Rgb> px(4096);
    for (Rgb& p : px) p = {dist(rng), dist(rng), dist(rng)};
    for (auto _ : state) {
        double acc = 0.0;
        for (const Rgb& p : px) acc += cgm_pixel(p)[1];
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * int64_t(px.size()));
}
BENCHMARK(BM_CgmPixel);

static void BM_TmoMulawCgm(benchmark::State& state) {
    const int n = int(state.range(0));
    Image h = random_hdr(n, n, 2);
    for (auto _ : state) {
        Image s = tmo_mulaw_cgm(h);
        benchmark::DoNotOptimize(s.data.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_TmoMulawCgm)->Arg(128)->Arg(512);

static void BM_TmoHable(benchmark::State& state) {
    const int n = int(state.range(0));
    Image h = random_hdr(n, n, 3);
    for (auto _ : state) {
        Image s = tmo_hable(h, 1.0);
        benchmark::DoNotOptimize(s.data.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_TmoHable)->Arg(128)->Arg(512);

static void BM_LutApply(benchmark::State& state) {
    const int n = int(state.range(0));
    Image h = random_hdr(n, n, 4);
    Lut3D lut = bake_lut(hable_curve(1.0), 33);
    for (auto _ : state) {
        Image s = lut_apply(h, lut);
        benchmark::DoNotOptimize(s.data.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_LutApply)->Arg(128)->Arg(512);

static void BM_HtmpSupervision(benchmark::State& state) {
    const int n = int(state.range(0));
    Image h = random_hdr(n, n, 5);
    HtmpConfig cfg;
    for (auto _ : state) {
        HtmpSupervision sup = htmp_supervision(h, cfg);
        benchmark::DoNotOptimize(sup.target.data.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_HtmpSupervision)->Arg(128)->Arg(256);

static void BM_Conv2dForward(benchmark::State& state) {
    const int n = int(state.range(0));
    Tensor x = random_tensor(1, 32, n, n, 6);
    Tensor w = random_tensor(32, 32, 3, 3, 7);
    Tensor b = random_tensor(1, 32, 1, 1, 8);
    for (auto _ : state) {
        Tensor y = ad::conv2d_forward(x, w, &b, 1, ad::Pad::Reflect);
        benchmark::DoNotOptimize(y.v.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

static void BM_Conv2dBackward(benchmark::State& state) {
    const int n = int(state.range(0));
    Tensor x = random_tensor(1, 32, n, n, 9);
    Tensor w = random_tensor(32, 32, 3, 3, 10);
    Tensor b = random_tensor(1, 32, 1, 1, 11);
    Tensor y = ad::conv2d_forward(x, w, &b, 1, ad::Pad::Reflect);
    Tensor dy = random_tensor(y.n, y.c, y.h, y.w, 12);
    for (auto _ : state) {
        ad::Conv2dGrads g = ad::conv2d_backward(x, w, 1, ad::Pad::Reflect, dy, true, true);
        benchmark::DoNotOptimize(g.dw.v.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);

static void BM_Ssim(benchmark::State& state) {
    const int n = int(state.range(0));
    Image a = random_hdr(n, n, 13);
    Image b = random_hdr(n, n, 14);
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(256);

static void BM_Ciede2000(benchmark::State& state) {
    const int n = int(state.range(0));
    Image a = random_hdr(n, n, 15);
    Image b = random_hdr(n, n, 16);
    for (auto _ : state) benchmark::DoNotOptimize(ciede2000(a, b));
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_Ciede2000)->Arg(128)->Arg(256);

static void BM_Tmqi(benchmark::State& state) {
    const int n = int(state.range(0));
    Image h = random_hdr(n, n, 17);
    Image s = tmo_hable(h, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(tmqi(h, s).q);
    state.SetItemsProcessed(state.iterations() * int64_t(n) * n);
}
BENCHMARK(BM_Tmqi)->Arg(176);

BENCHMARK_MAIN();
