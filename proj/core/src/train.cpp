#include "hdrsynth/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

namespace hdrsynth {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

// One Adam state per parameter tensor; step count shared per optimizer.
class Adam {
public:
    Adam(double lr, double b1, double b2, double eps) : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

    void begin_step() { ++t_; }

    void update(const std::string& name, Tensor& param, const Tensor& grad) {
        auto& [m, v] = state_[name];
        if (m.v.empty()) {
            m = Tensor(param.n, param.c, param.h, param.w);
            v = Tensor(param.n, param.c, param.h, param.w);
        }
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        for (long i = 0; i < param.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            double g = grad.v[k];
            m.v[k] = b1_ * m.v[k] + (1.0 - b1_) * g;
            v.v[k] = b2_ * v.v[k] + (1.0 - b2_) * g * g;
            double mhat = m.v[k] / c1;
            double vhat = v.v[k] / c2;
            param.v[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

private:
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> state_;
};

struct CorpusItem {
    Tensor hdr;    // (1,3,P,P)
    Tensor cond;   // (1,3K,P,P)
    Tensor target; // (1,3,P,P)
    std::vector<uint8_t> region; // 0 high, 1 mid, 2 low, per pixel
};

Image center_crop(const Image& img, int patch) {
    if (img.width < patch || img.height < patch)
        fail("train: corpus image smaller than patch size");
    if (img.width == patch && img.height == patch) return img;
    return crop(img, (img.width - patch) / 2, (img.height - patch) / 2, patch, patch);
}

Tensor crop_tensor(const Tensor& t, int y0, int x0, int h, int w) {
    Tensor out(t.n, t.c, h, w);
    for (int n = 0; n < t.n; ++n)
        for (int c = 0; c < t.c; ++c) {
            const double* src = t.ptr(n, c) + static_cast<size_t>(y0) * t.w + x0;
            double* dst = out.ptr(n, c);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    dst[static_cast<size_t>(y) * w + x] = src[static_cast<size_t>(y) * t.w + x];
        }
    return out;
}

void copy_item(const Tensor& src, Tensor& dst, int item) {
    const long per = src.size();
    std::copy(src.v.begin(), src.v.end(), dst.v.begin() + static_cast<size_t>(item) * per);
}

} // namespace

TrainResult train(const std::vector<Image>& hdr_corpus, const Lut3D& lut, const TrainConfig& cfg,
                  const std::vector<Image>* real_sdr) {
    if (hdr_corpus.empty()) fail("train: empty corpus");
    if (cfg.steps < 1) fail("train: steps must be >= 1");
    if (cfg.batch < 1) fail("train: batch must be >= 1");
    if (cfg.lambda_adv < 0.0) fail("train: lambda must be >= 0");
    const int P = cfg.patch;
    const int kD = 70; // discriminator crop = its receptive field
    if (cfg.adversarial) {
        if (!real_sdr || real_sdr->empty()) fail("train: adversarial mode needs real SDR images");
        if (P < kD) fail("train: adversarial mode needs patch >= 70");
    }

    HtmpConfig hcfg;
    hcfg.a = cfg.htmp_a;
    hcfg.b = cfg.htmp_b;
    hcfg.mu = cfg.mu;
    hcfg.lut = lut;

    // Per-patch supervision and conditions are fixed for the whole run.
    std::vector<CorpusItem> corpus;
    corpus.reserve(hdr_corpus.size());
    for (const Image& raw : hdr_corpus) {
        Image patch = center_crop(raw, P);
        CorpusItem item;
        item.hdr = image_to_tensor(patch);
        item.cond = stack_conditions(make_condition_images(patch, lut));
        HtmpSupervision sup = htmp_supervision(patch, hcfg);
        item.target = image_to_tensor(sup.target);
        item.region.resize(static_cast<size_t>(patch.pixels()));
        for (long i = 0; i < patch.pixels(); ++i) {
            size_t k = static_cast<size_t>(i);
            item.region[k] = sup.masks.high[k] ? 0 : (sup.masks.mid[k] ? 1 : 2);
        }
        corpus.push_back(std::move(item));
    }

    std::vector<Image> reals;
    if (cfg.adversarial)
        for (const Image& raw : *real_sdr) reals.push_back(center_crop(raw, P));

    NetworkWeights weights = init_weights(cfg.seed, cfg.arch);
    Adam opt_g(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    Adam opt_d(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    // Crop draws come from their own stream so enabling adversarial mode
    // does not change the init.
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    const int B = cfg.batch;
    const int K = 3 * cfg.arch.cond_inputs;
    std::vector<TraceRow> trace;
    trace.reserve(static_cast<size_t>(cfg.steps));

    for (int step = 0; step < cfg.steps; ++step) {
        // Assemble the rotating batch.
        Tensor hdrB(B, 3, P, P), condB(B, K, P, P), targetB(B, 3, P, P);
        std::vector<const CorpusItem*> items(static_cast<size_t>(B));
        for (int i = 0; i < B; ++i) {
            const CorpusItem& it =
                corpus[(static_cast<size_t>(step) * B + i) % corpus.size()];
            items[static_cast<size_t>(i)] = &it;
            copy_item(it.hdr, hdrB, i);
            copy_item(it.cond, condB, i);
            copy_item(it.target, targetB, i);
        }

        TraceRow row;
        row.step = step;

        // Generator step.
        ad::Graph g;
        ParamBind bind_g;
        bind_g.trainable = true;
        SynthNodes net = build_synth(g, weights, hdrB, condB, &bind_g);
        ad::Graph::Node* lhtmp = g.l1_mean(net.out, targetB);
        row.l_htmp = lhtmp->val.v[0];

        {
            // Region components of the same mean-L1 (reported, not trained
            // separately; they sum to l_htmp by the partition).
            const double norm = 1.0 / static_cast<double>(net.out->val.size());
            double acc[3] = {0.0, 0.0, 0.0};
            const long plane = static_cast<long>(P) * P;
            for (int i = 0; i < B; ++i)
                for (long px = 0; px < plane; ++px) {
                    uint8_t r = items[static_cast<size_t>(i)]->region[static_cast<size_t>(px)];
                    double d = 0.0;
                    for (int c = 0; c < 3; ++c)
                        d += std::fabs(net.out->val.ptr(i, c)[px] - targetB.ptr(i, c)[px]);
                    acc[r] += d;
                }
            row.l_high = acc[0] * norm;
            row.l_mid = acc[1] * norm;
            row.l_low = acc[2] * norm;
        }

        int fy = 0, fx = 0;
        if (cfg.adversarial) {
            fy = static_cast<int>(rng() % static_cast<uint64_t>(P - kD + 1));
            fx = static_cast<int>(rng() % static_cast<uint64_t>(P - kD + 1));
            ad::Graph::Node* fake = g.slice_spatial(net.out, fy, fx, kD, kD);
            ad::Graph::Node* d_fake = build_discriminator(g, weights, fake); // D frozen here
            ad::Graph::Node* l_adv = g.lsq_mean(d_fake, 1.0);
            row.l_adv_g = l_adv->val.v[0];
            ad::Graph::Node* total = g.add(lhtmp, g.scale(l_adv, cfg.lambda_adv));
            g.backward(total);
        } else {
            g.backward(lhtmp);
        }

        if (!std::isfinite(row.l_htmp) || !std::isfinite(row.l_adv_g))
            fail("train: NaN loss at step " + std::to_string(step));

        opt_g.begin_step();
        for (auto& [name, node] : bind_g.nodes)
            opt_g.update(name, weights.at(name), node->grad);

        if (cfg.adversarial) {
            // Discriminator step on the same fakes, detached.
            ad::Graph gd;
            Tensor fakeT = crop_tensor(net.out->val, fy, fx, kD, kD);
            Tensor realT(B, 3, kD, kD);
            for (int i = 0; i < B; ++i) {
                const Image& r =
                    reals[(static_cast<size_t>(step) * B + i) % reals.size()];
                int ry = static_cast<int>(rng() % static_cast<uint64_t>(r.height - kD + 1));
                int rx = static_cast<int>(rng() % static_cast<uint64_t>(r.width - kD + 1));
                Tensor rt = image_to_tensor(crop(r, rx, ry, kD, kD));
                copy_item(rt, realT, i);
            }
            ParamBind bind_d;
            bind_d.trainable = true;
            ad::Graph::Node* d_real = build_discriminator(gd, weights, gd.input(std::move(realT)), &bind_d);
            ad::Graph::Node* d_fake = build_discriminator(gd, weights, gd.input(std::move(fakeT)), &bind_d);
            ad::Graph::Node* loss_d =
                gd.add(gd.lsq_mean(d_real, 1.0), gd.lsq_mean(d_fake, 0.0));
            row.l_adv_d = loss_d->val.v[0];
            if (!std::isfinite(row.l_adv_d))
                fail("train: NaN loss at step " + std::to_string(step));
            gd.backward(loss_d);
            opt_d.begin_step();
            for (auto& [name, node] : bind_d.nodes)
                opt_d.update(name, weights.at(name), node->grad);
        }

        trace.push_back(row);
    }

    return {std::move(weights), std::move(trace)};
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path.string());
    out << "step,l_htmp,l_high,l_mid,l_low,l_adv_g,l_adv_d\n";
    char buf[256];
    for (const TraceRow& r : trace) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                      r.l_htmp, r.l_high, r.l_mid, r.l_low, r.l_adv_g, r.l_adv_d);
        out << buf;
    }
    if (!out) fail("write failed: " + path.string());
}

} // namespace hdrsynth
