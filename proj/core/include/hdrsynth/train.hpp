#pragma once

#include "hdrsynth/htmp.hpp"
#include "hdrsynth/network.hpp"

#include <filesystem>
#include <vector>

namespace hdrsynth {

struct TrainConfig {
    uint64_t seed = 0;
    int steps = 200;
    int patch = 64;     // corpus images are center-cropped to patch x patch
    int batch = 4;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lambda_adv = 0.01;
    bool adversarial = false;
    double htmp_a = 95.0;
    double htmp_b = 5.0;
    double mu = 5000.0;
    ArchConfig arch;
};

struct TraceRow {
    int step = 0;
    double l_htmp = 0.0, l_high = 0.0, l_mid = 0.0, l_low = 0.0;
    double l_adv_g = 0.0, l_adv_d = 0.0;
};

struct TrainResult {
    NetworkWeights weights;
    std::vector<TraceRow> trace;
};

// Deterministic Adam trainer. Batches rotate round-robin through the
// corpus; condition images and HTMP supervision are computed once per
// corpus patch. Adversarial mode alternates one generator step with one
// discriminator step on 70x70 crops (needs patch >= 70 and a real SDR
// corpus). Throws on NaN losses with the offending step index.
TrainResult train(const std::vector<Image>& hdr_corpus, const Lut3D& lut,
                  const TrainConfig& cfg, const std::vector<Image>* real_sdr = nullptr);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

} // namespace hdrsynth
