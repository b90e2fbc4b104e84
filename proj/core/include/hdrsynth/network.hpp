#pragma once

#include "hdrsynth/autodiff.hpp"
#include "hdrsynth/image.hpp"
#include "hdrsynth/lut.hpp"
#include "hdrsynth/tensor.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hdrsynth {

// Fixed topology, tunable widths. The condition trunk needs inputs of at
// least 49x49 so its three strided 7x7 convolutions fit; the streams work
// from 2x2 up. The discriminator accepts 70x70 or larger (its receptive
// field is exactly 70 with the strides below).
struct ArchConfig {
    int cond_inputs = 4; // condition images, 3 channels each
    std::array<int, 3> cond_channels{16, 32, 64};
    int cond_kernel = 7;
    int cond_stride = 4;
    int feat = 32; // hidden width of both streams
    double lrelu = 0.2;
    std::array<int, 4> disc_channels{16, 32, 64, 64};
    int disc_kernel = 4;
    std::array<int, 4> disc_strides{2, 2, 4, 2};

    bool operator==(const ArchConfig&) const = default;
};

// Ordered tensor directory; the order is the serialization order and the
// RNG consumption order of init_weights.
struct NetworkWeights {
    ArchConfig arch;
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
    long parameter_count() const;
};

// Kaiming-uniform fan-in draws (bound sqrt(6/fan_in)) from one
// mt19937_64(seed), consumed in directory order; biases zero. The GFM
// projections are the exception: zero weights with bias (1...,0...) so a
// fresh network modulates by identity. Values are snapped to the f32 grid
// so a save/load round trip is bitwise exact.
NetworkWeights init_weights(uint64_t seed, const ArchConfig& arch = {});

// Text header (architecture, endianness, tensor directory) followed by
// raw little-endian f32 payload in directory order.
void save_weights(const NetworkWeights& w, const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);

// Records the graph node bound to each weight tensor so the trainer can
// read gradients and write updates back. Scoped to one graph: builders
// sharing a ParamBind on the same graph reuse one node per tensor.
struct ParamBind {
    bool trainable = false;
    std::vector<std::pair<std::string, ad::Graph::Node*>> nodes;
};

struct SynthNodes {
    ad::Graph::Node* out = nullptr;        // (B,3,H,W) raw, unclamped
    ad::Graph::Node* global_out = nullptr; // N_g contribution
    ad::Graph::Node* local_out = nullptr;  // N_l contribution
    ad::Graph::Node* vc = nullptr;         // (B,64,1,1)
};

// cond is the stacked condition tensor (B, 3*cond_inputs, Hc, Wc); its
// spatial size is independent of hdr's. `modulate` exists to compare
// against the unmodulated pass; inference and training use true.
SynthNodes build_synth(ad::Graph& g, const NetworkWeights& w, const Tensor& hdr,
                       const Tensor& cond, ParamBind* bind = nullptr, bool modulate = true);

ad::Graph::Node* build_discriminator(ad::Graph& g, const NetworkWeights& w, ad::Graph::Node* x,
                                     ParamBind* bind = nullptr);

// Condition set fed to N_c, in fixed order: clip, linear, reinhard, lut.
std::vector<Image> make_condition_images(const Image& h, const Lut3D& lut);

Tensor image_to_tensor(const Image& img);                    // (1,3,H,W)
Tensor stack_conditions(const std::vector<Image>& conds);    // (1,3K,H,W)
Image tensor_to_image(const Tensor& t, int item, Gamut gamut, Transfer transfer); // clamps

// Single-image conveniences built on the graph.
std::vector<double> condition_forward(const std::vector<Image>& conds, const NetworkWeights& w);
Tensor synth_forward_raw(const Image& h, const std::vector<Image>& conds,
                         const NetworkWeights& w);
Image synth_forward(const Image& h, const std::vector<Image>& conds, const NetworkWeights& w);

// LSGAN objectives on patch scores (closed forms, no graph).
struct LsganLosses {
    double loss_d = 0.0;
    double loss_g = 0.0;
};
LsganLosses lsgan_losses(const Tensor& d_real, const Tensor& d_fake);

} // namespace hdrsynth
