#include "hdrsynth/network.hpp"

#include "hdrsynth/tmo.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hdrsynth {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

enum class Init : uint8_t { Kaiming, ZeroBias, GfmWeight, GfmBias };

struct Entry {
    std::string name;
    int n, c, h, w;
    Init init;
};

// Serialization order, RNG consumption order, and the shape contract all
// come from this single listing.
std::vector<Entry> directory(const ArchConfig& a) {
    std::vector<Entry> d;
    auto conv = [&](const std::string& name, int co, int ci, int k) {
        d.push_back({name + ".w", co, ci, k, k, Init::Kaiming});
        d.push_back({name + ".b", 1, co, 1, 1, Init::ZeroBias});
    };
    auto gfm = [&](const std::string& name, int feat_c, int vc) {
        d.push_back({name + ".w", 2 * feat_c, vc, 1, 1, Init::GfmWeight});
        d.push_back({name + ".b", 1, 2 * feat_c, 1, 1, Init::GfmBias});
    };
    const int in_c = 3 * a.cond_inputs;
    conv("cond.conv1", a.cond_channels[0], in_c, a.cond_kernel);
    conv("cond.conv2", a.cond_channels[1], a.cond_channels[0], a.cond_kernel);
    conv("cond.conv3", a.cond_channels[2], a.cond_channels[1], a.cond_kernel);
    conv("global.conv1", a.feat, 3, 1);
    conv("global.conv2", a.feat, a.feat, 1);
    conv("global.conv3", 3, a.feat, 1);
    conv("local.block1.feat", a.feat, 3, 3);
    conv("local.block1.gate", a.feat, 3, 3);
    conv("local.block2.feat", a.feat, a.feat, 3);
    conv("local.block2.gate", a.feat, a.feat, 3);
    conv("local.block3.feat", 3, a.feat, 3);
    conv("local.block3.gate", 3, a.feat, 3);
    const int vc = a.cond_channels[2];
    gfm("gfm.global1", a.feat, vc);
    gfm("gfm.global2", a.feat, vc);
    gfm("gfm.global3", 3, vc);
    gfm("gfm.local1", a.feat, vc);
    gfm("gfm.local2", a.feat, vc);
    gfm("gfm.local3", 3, vc);
    conv("disc.conv1", a.disc_channels[0], 3, a.disc_kernel);
    conv("disc.conv2", a.disc_channels[1], a.disc_channels[0], a.disc_kernel);
    conv("disc.conv3", a.disc_channels[2], a.disc_channels[1], a.disc_kernel);
    conv("disc.conv4", a.disc_channels[3], a.disc_channels[2], a.disc_kernel);
    conv("disc.head", 1, a.disc_channels[3], 1);
    return d;
}

// mt19937_64 output mapped to [0,1) by the fixed 53-bit rule, so draws do
// not depend on the standard library's distribution implementation.
double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

} // namespace

Tensor& NetworkWeights::at(std::string_view name) {
    for (auto& [n, t] : tensors)
        if (n == name) return t;
    fail("unknown weight tensor: " + std::string(name));
}

const Tensor& NetworkWeights::at(std::string_view name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    fail("unknown weight tensor: " + std::string(name));
}

long NetworkWeights::parameter_count() const {
    long total = 0;
    for (const auto& [n, t] : tensors) total += t.size();
    return total;
}

NetworkWeights init_weights(uint64_t seed, const ArchConfig& arch) {
    NetworkWeights w;
    w.arch = arch;
    std::mt19937_64 rng(seed);
    for (const Entry& e : directory(arch)) {
        Tensor t(e.n, e.c, e.h, e.w);
        switch (e.init) {
            case Init::Kaiming: {
                double bound = std::sqrt(6.0 / (static_cast<double>(e.c) * e.h * e.w));
                for (double& v : t.v) v = snap_f32((2.0 * next_uniform(rng) - 1.0) * bound);
                break;
            }
            case Init::GfmBias: {
                // (1...,0...): scale half 1, shift half 0 -> identity modulation.
                for (int c = 0; c < e.c / 2; ++c) t.v[static_cast<size_t>(c)] = 1.0;
                break;
            }
            case Init::ZeroBias:
            case Init::GfmWeight:
                break;
        }
        w.tensors.emplace_back(e.name, std::move(t));
    }
    return w;
}

void save_weights(const NetworkWeights& w, const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little,
                  "weights io assumes a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path.string());
    const ArchConfig& a = w.arch;
    out << "hdrsynth-weights 1\n";
    out << "endian little\n";
    out << "cond_inputs " << a.cond_inputs << "\n";
    out << "cond_channels " << a.cond_channels[0] << " " << a.cond_channels[1] << " "
        << a.cond_channels[2] << "\n";
    out << "cond_kernel " << a.cond_kernel << "\n";
    out << "cond_stride " << a.cond_stride << "\n";
    out << "feat " << a.feat << "\n";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", a.lrelu);
    out << "lrelu " << buf << "\n";
    out << "disc_channels " << a.disc_channels[0] << " " << a.disc_channels[1] << " "
        << a.disc_channels[2] << " " << a.disc_channels[3] << "\n";
    out << "disc_kernel " << a.disc_kernel << "\n";
    out << "disc_strides " << a.disc_strides[0] << " " << a.disc_strides[1] << " "
        << a.disc_strides[2] << " " << a.disc_strides[3] << "\n";
    out << "tensors " << w.tensors.size() << "\n";
    for (const auto& [name, t] : w.tensors)
        out << name << " " << t.n << " " << t.c << " " << t.h << " " << t.w << "\n";
    out << "payload\n";
    std::vector<float> f32;
    for (const auto& [name, t] : w.tensors) {
        f32.resize(static_cast<size_t>(t.size()));
        for (long i = 0; i < t.size(); ++i)
            f32[static_cast<size_t>(i)] = static_cast<float>(t.v[static_cast<size_t>(i)]);
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
    }
    if (!out) fail("write failed: " + path.string());
}

NetworkWeights load_weights(const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little,
                  "weights io assumes a little-endian host");
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path.string());

    auto expect_line = [&](const char* key) {
        std::string line;
        if (!std::getline(in, line)) fail("truncated weights header: " + path.string());
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok != key) fail("weights header: expected '" + std::string(key) + "', got '" + tok +
                             "': " + path.string());
        return ls;
    };

    {
        std::string line;
        if (!std::getline(in, line) || line != "hdrsynth-weights 1")
            fail("not a version-1 weights file: " + path.string());
        if (!std::getline(in, line) || line != "endian little")
            fail("unsupported endianness tag: " + path.string());
    }

    ArchConfig a;
    { auto ls = expect_line("cond_inputs"); ls >> a.cond_inputs; }
    { auto ls = expect_line("cond_channels"); ls >> a.cond_channels[0] >> a.cond_channels[1] >> a.cond_channels[2]; }
    { auto ls = expect_line("cond_kernel"); ls >> a.cond_kernel; }
    { auto ls = expect_line("cond_stride"); ls >> a.cond_stride; }
    { auto ls = expect_line("feat"); ls >> a.feat; }
    { auto ls = expect_line("lrelu"); ls >> a.lrelu; }
    { auto ls = expect_line("disc_channels"); ls >> a.disc_channels[0] >> a.disc_channels[1] >> a.disc_channels[2] >> a.disc_channels[3]; }
    { auto ls = expect_line("disc_kernel"); ls >> a.disc_kernel; }
    { auto ls = expect_line("disc_strides"); ls >> a.disc_strides[0] >> a.disc_strides[1] >> a.disc_strides[2] >> a.disc_strides[3]; }

    size_t count = 0;
    { auto ls = expect_line("tensors"); ls >> count; }

    std::vector<Entry> expected = directory(a);
    if (count != expected.size())
        fail("architecture mismatch: expected " + std::to_string(expected.size()) +
             " tensors, header lists " + std::to_string(count) + ": " + path.string());

    NetworkWeights w;
    w.arch = a;
    for (size_t i = 0; i < count; ++i) {
        std::string line;
        if (!std::getline(in, line)) fail("truncated tensor directory: " + path.string());
        std::istringstream ls(line);
        std::string name;
        int n, c, h, wd;
        if (!(ls >> name >> n >> c >> h >> wd)) fail("bad tensor line: " + path.string());
        const Entry& e = expected[i];
        if (name != e.name || n != e.n || c != e.c || h != e.h || wd != e.w)
            fail("architecture mismatch at tensor '" + name + "': " + path.string());
        w.tensors.emplace_back(name, Tensor(n, c, h, wd));
    }
    {
        std::string line;
        if (!std::getline(in, line) || line != "payload")
            fail("missing payload marker: " + path.string());
    }
    std::vector<float> f32;
    for (auto& [name, t] : w.tensors) {
        f32.resize(static_cast<size_t>(t.size()));
        in.read(reinterpret_cast<char*>(f32.data()),
                static_cast<std::streamsize>(f32.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(f32.size() * sizeof(float)))
            fail("truncated payload in tensor '" + name + "': " + path.string());
        for (long i = 0; i < t.size(); ++i)
            t.v[static_cast<size_t>(i)] = static_cast<double>(f32[static_cast<size_t>(i)]);
    }
    return w;
}

namespace {

// Lazily creates one graph input node per touched weight tensor. A shared
// ParamBind seeds the cache so several builders on the same graph reuse
// one node per tensor (gradients then accumulate in one place).
class Binder {
public:
    Binder(ad::Graph& g, const NetworkWeights& w, ParamBind* bind)
        : g_(g), w_(w), bind_(bind) {
        if (bind_)
            for (auto& [name, node] : bind_->nodes) cache_.emplace(name, node);
    }

    ad::Graph::Node* operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        bool trainable = bind_ && bind_->trainable;
        ad::Graph::Node* node = g_.input(w_.at(name), trainable);
        cache_.emplace(name, node);
        if (bind_) bind_->nodes.emplace_back(name, node);
        return node;
    }

private:
    ad::Graph& g_;
    const NetworkWeights& w_;
    ParamBind* bind_;
    std::map<std::string, ad::Graph::Node*> cache_;
};

} // namespace

SynthNodes build_synth(ad::Graph& g, const NetworkWeights& w, const Tensor& hdr,
                       const Tensor& cond, ParamBind* bind, bool modulate) {
    const ArchConfig& a = w.arch;
    if (hdr.c != 3) fail("build_synth: hdr must have 3 channels");
    if (cond.c != 3 * a.cond_inputs) fail("build_synth: condition channel mismatch");
    if (cond.n != hdr.n) fail("build_synth: batch mismatch");
    Binder p(g, w, bind);

    ad::Graph::Node* c = g.input(cond);
    for (int i = 1; i <= 3; ++i) {
        std::string base = "cond.conv" + std::to_string(i);
        c = g.leaky_relu(g.conv2d(c, p(base + ".w"), p(base + ".b"), a.cond_stride,
                                  ad::Pad::Reflect),
                         a.lrelu);
    }
    ad::Graph::Node* vc = g.global_avg_pool(c);

    auto gfm = [&](ad::Graph::Node* f, const std::string& name, int feat_c) {
        if (!modulate) return f;
        ad::Graph::Node* proj = g.linear(vc, p(name + ".w"), p(name + ".b"));
        ad::Graph::Node* s = g.slice_channels(proj, 0, feat_c);
        ad::Graph::Node* t = g.slice_channels(proj, feat_c, 2 * feat_c);
        return g.channel_affine(f, s, t);
    };

    ad::Graph::Node* hin = g.input(hdr);

    ad::Graph::Node* g1 = gfm(
        g.leaky_relu(g.conv2d(hin, p("global.conv1.w"), p("global.conv1.b"), 1, ad::Pad::None),
                     a.lrelu),
        "gfm.global1", a.feat);
    ad::Graph::Node* g2 = gfm(
        g.leaky_relu(g.conv2d(g1, p("global.conv2.w"), p("global.conv2.b"), 1, ad::Pad::None),
                     a.lrelu),
        "gfm.global2", a.feat);
    ad::Graph::Node* g3 =
        gfm(g.conv2d(g2, p("global.conv3.w"), p("global.conv3.b"), 1, ad::Pad::None),
            "gfm.global3", 3);

    auto block = [&](ad::Graph::Node* in, const std::string& base, int cin, int cout) {
        ad::Graph::Node* f = g.leaky_relu(
            g.conv2d(in, p(base + ".feat.w"), p(base + ".feat.b"), 1, ad::Pad::Reflect), a.lrelu);
        ad::Graph::Node* m =
            g.sigmoid(g.conv2d(in, p(base + ".gate.w"), p(base + ".gate.b"), 1, ad::Pad::Reflect));
        ad::Graph::Node* y = g.mul(f, m);
        if (cin == cout) y = g.add(y, in); // identity skip when shapes allow
        return y;
    };
    ad::Graph::Node* l1 = gfm(block(hin, "local.block1", 3, a.feat), "gfm.local1", a.feat);
    ad::Graph::Node* l2 = gfm(block(l1, "local.block2", a.feat, a.feat), "gfm.local2", a.feat);
    ad::Graph::Node* l3 = gfm(block(l2, "local.block3", a.feat, 3), "gfm.local3", 3);

    SynthNodes out;
    out.global_out = g3;
    out.local_out = l3;
    out.vc = vc;
    out.out = g.add(g3, l3);
    return out;
}

ad::Graph::Node* build_discriminator(ad::Graph& g, const NetworkWeights& w, ad::Graph::Node* x,
                                     ParamBind* bind) {
    const ArchConfig& a = w.arch;
    Binder p(g, w, bind);
    ad::Graph::Node* d = x;
    for (int i = 1; i <= 4; ++i) {
        std::string base = "disc.conv" + std::to_string(i);
        d = g.leaky_relu(g.conv2d(d, p(base + ".w"), p(base + ".b"),
                                  a.disc_strides[static_cast<size_t>(i - 1)], ad::Pad::None),
                         a.lrelu);
    }
    return g.conv2d(d, p("disc.head.w"), p("disc.head.b"), 1, ad::Pad::None);
}

std::vector<Image> make_condition_images(const Image& h, const Lut3D& lut) {
    return {tmo_clip(h), tmo_linear(h), tmo_reinhard(h), lut_apply(h, lut)};
}

Tensor image_to_tensor(const Image& img) {
    Tensor t(1, 3, img.height, img.width);
    for (int c = 0; c < 3; ++c) {
        double* dst = t.ptr(0, c);
        const float* src = img.data.data() + c;
        const long n = img.pixels();
        for (long i = 0; i < n; ++i) dst[i] = static_cast<double>(src[3 * i]);
    }
    return t;
}

Tensor stack_conditions(const std::vector<Image>& conds) {
    if (conds.empty()) fail("stack_conditions: no condition images");
    for (const Image& c : conds)
        if (!c.same_shape(conds[0])) fail("stack_conditions: size mismatch among conditions");
    Tensor t(1, 3 * static_cast<int>(conds.size()), conds[0].height, conds[0].width);
    for (size_t k = 0; k < conds.size(); ++k) {
        const long n = conds[k].pixels();
        for (int c = 0; c < 3; ++c) {
            double* dst = t.ptr(0, 3 * static_cast<int>(k) + c);
            const float* src = conds[k].data.data() + c;
            for (long i = 0; i < n; ++i) dst[i] = static_cast<double>(src[3 * i]);
        }
    }
    return t;
}

Image tensor_to_image(const Tensor& t, int item, Gamut gamut, Transfer transfer) {
    if (t.c != 3 || item < 0 || item >= t.n) fail("tensor_to_image: bad tensor");
    Image img(t.w, t.h, gamut, transfer);
    for (int c = 0; c < 3; ++c) {
        const double* src = t.ptr(item, c);
        float* dst = img.data.data() + c;
        const long n = img.pixels();
        for (long i = 0; i < n; ++i) {
            double v = src[i];
            dst[3 * i] = static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
        }
    }
    return img;
}

std::vector<double> condition_forward(const std::vector<Image>& conds, const NetworkWeights& w) {
    ad::Graph g;
    Binder p(g, w, nullptr);
    ad::Graph::Node* c = g.input(stack_conditions(conds));
    for (int i = 1; i <= 3; ++i) {
        std::string base = "cond.conv" + std::to_string(i);
        c = g.leaky_relu(g.conv2d(c, p(base + ".w"), p(base + ".b"), w.arch.cond_stride,
                                  ad::Pad::Reflect),
                         w.arch.lrelu);
    }
    return g.global_avg_pool(c)->val.v;
}

Tensor synth_forward_raw(const Image& h, const std::vector<Image>& conds,
                         const NetworkWeights& w) {
    ad::Graph g;
    SynthNodes nodes = build_synth(g, w, image_to_tensor(h), stack_conditions(conds));
    return nodes.out->val;
}

Image synth_forward(const Image& h, const std::vector<Image>& conds, const NetworkWeights& w) {
    Tensor raw = synth_forward_raw(h, conds, w);
    return tensor_to_image(raw, 0, Gamut::BT709, Transfer::Gamma709);
}

LsganLosses lsgan_losses(const Tensor& d_real, const Tensor& d_fake) {
    if (d_real.size() == 0 || d_fake.size() == 0) fail("lsgan_losses: empty score tensor");
    double sr = 0.0, sf = 0.0, sg = 0.0;
    for (double v : d_real.v) sr += (v - 1.0) * (v - 1.0);
    for (double v : d_fake.v) {
        sf += v * v;
        sg += (v - 1.0) * (v - 1.0);
    }
    LsganLosses l;
    l.loss_d = 0.5 * sr / static_cast<double>(d_real.size()) +
               0.5 * sf / static_cast<double>(d_fake.size());
    l.loss_g = 0.5 * sg / static_cast<double>(d_fake.size());
    return l;
}

} // namespace hdrsynth
