// hdrsynth: HDR->SDR conversion, supervision targets, network training and
// inference, metric reports, alignment, and LUT utilities. Every subcommand
// writes a JSON manifest next to its primary output with all defaults
// materialized; `replay --manifest FILE` re-runs it.

#include "hdrsynth/htmp.hpp"
#include "hdrsynth/image.hpp"
#include "hdrsynth/lut.hpp"
#include "hdrsynth/metrics.hpp"
#include "hdrsynth/network.hpp"
#include "hdrsynth/parallel.hpp"
#include "hdrsynth/tmo.hpp"
#include "hdrsynth/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hdrsynth;

namespace {

#ifndef HDRSYNTH_VERSION
#define HDRSYNTH_VERSION "0.0.0"
#endif
constexpr const char* kVersion = HDRSYNTH_VERSION;

int g_threads_flag = 0; // 0 = auto (env var or hardware)

void apply_threads() {
    if (g_threads_flag > 0) set_thread_count(g_threads_flag);
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void put_opt(json& j, const char* key, const std::optional<double>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

std::optional<double> get_opt(const json& j, const char* key) {
    if (j.contains(key) && !j.at(key).is_null()) return j.at(key).get<double>();
    return std::nullopt;
}

json manifest_head(const char* subcommand) {
    json m;
    m["tool"] = "hdrsynth";
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    if (g_threads_flag > 0)
        m["threads"] = g_threads_flag;
    else
        m["threads"] = nullptr;
    return m;
}

void write_manifest(json m, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const fs::path& primary_output) {
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    const fs::path path = primary_output.string() + ".manifest.json";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << m.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

Image load_tagged(const std::string& path, const std::string& gamut, const std::string& transfer) {
    return load_image(path, gamut_from_string(gamut.c_str()),
                      transfer_from_string(transfer.c_str()));
}

bool image_ext(const fs::path& p) {
    const std::string e = p.extension().string();
    return e == ".png" || e == ".pfm";
}

std::vector<fs::path> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && image_ext(entry.path())) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no .png/.pfm images in " + dir);
    return out;
}

// Pairs two directories by sorted order; counts must match.
std::vector<std::pair<fs::path, fs::path>> pair_dirs(const std::string& a_dir,
                                                     const std::string& b_dir) {
    const std::vector<fs::path> a = list_images(a_dir);
    const std::vector<fs::path> b = list_images(b_dir);
    if (a.size() != b.size())
        throw std::runtime_error("unpaired inputs: " + std::to_string(a.size()) + " vs " +
                                 std::to_string(b.size()) + " images");
    std::vector<std::pair<fs::path, fs::path>> out;
    out.reserve(a.size());
    for (size_t i = 0; i < a.size(); ++i) out.emplace_back(a[i], b[i]);
    return out;
}

// The default y(.) grading operator when no cube file is given: a filmic
// curve at unit exposure baked on a 33^3 lattice (frame-independent).
constexpr const char* kBuiltinLutName = "builtin:hable33";
Lut3D resolve_lut(const std::string& path) {
    if (path.empty()) return bake_lut(hable_curve(1.0), 33);
    return lut_load(path);
}
std::string lut_label(const std::string& path) {
    return path.empty() ? std::string(kBuiltinLutName) : path;
}

// ---------------------------------------------------------------- convert

struct ConvertCfg {
    std::string tmo = "clip";
    std::string input, output;
    std::string in_gamut = "bt2020", in_transfer = "pq";
    std::string lut_path;
    double mu = 5000.0;
    std::optional<double> exposure;
    std::optional<double> clip_white;
    double percentile = 99.9;
    int bits = 16;
};

json to_json(const ConvertCfg& c) {
    json j;
    j["tmo"] = c.tmo;
    j["input"] = c.input;
    j["output"] = c.output;
    j["in_gamut"] = c.in_gamut;
    j["in_transfer"] = c.in_transfer;
    j["lut"] = c.lut_path.empty() ? json(nullptr) : json(c.lut_path);
    j["mu"] = c.mu;
    put_opt(j, "exposure", c.exposure);
    put_opt(j, "clip_white", c.clip_white);
    j["percentile"] = c.percentile;
    j["bits"] = c.bits;
    return j;
}

ConvertCfg convert_from_json(const json& j) {
    ConvertCfg c;
    c.tmo = j.at("tmo").get<std::string>();
    c.input = j.at("input").get<std::string>();
    c.output = j.at("output").get<std::string>();
    c.in_gamut = j.at("in_gamut").get<std::string>();
    c.in_transfer = j.at("in_transfer").get<std::string>();
    if (!j.at("lut").is_null()) c.lut_path = j.at("lut").get<std::string>();
    c.mu = j.at("mu").get<double>();
    c.exposure = get_opt(j, "exposure");
    c.clip_white = get_opt(j, "clip_white");
    c.percentile = j.at("percentile").get<double>();
    c.bits = j.at("bits").get<int>();
    return c;
}

void run_convert(const ConvertCfg& c) {
    if (c.tmo == "lut" && c.lut_path.empty())
        throw std::runtime_error("--tmo lut requires --lut FILE");
    const Image in = load_tagged(c.input, c.in_gamut, c.in_transfer);
    TmoOptions opt;
    opt.mu = c.mu;
    opt.exposure = c.exposure;
    opt.clip_white = c.clip_white;
    opt.linear_percentile = c.percentile;
    Lut3D lut;
    if (!c.lut_path.empty()) {
        lut = lut_load(c.lut_path);
        opt.lut = &lut;
    }
    const Image out = apply_tmo(c.tmo, in, opt);
    save_image(out, c.output, c.bits);
    json m = manifest_head("convert");
    m["config"] = to_json(c);
    write_manifest(m, {c.input}, {c.output}, c.output);
}

// ----------------------------------------------------------------- target

struct TargetCfg {
    std::string input, output;
    double a = 95.0, b = 5.0, mu = 5000.0;
    std::string lut_path; // empty = builtin
    bool maxrgb = false;
    int bits = 16;
};

json to_json(const TargetCfg& c) {
    json j;
    j["input"] = c.input;
    j["output"] = c.output;
    j["a"] = c.a;
    j["b"] = c.b;
    j["mu"] = c.mu;
    j["lut"] = lut_label(c.lut_path);
    j["maxrgb"] = c.maxrgb;
    j["bits"] = c.bits;
    return j;
}

TargetCfg target_from_json(const json& j) {
    TargetCfg c;
    c.input = j.at("input").get<std::string>();
    c.output = j.at("output").get<std::string>();
    c.a = j.at("a").get<double>();
    c.b = j.at("b").get<double>();
    c.mu = j.at("mu").get<double>();
    const std::string l = j.at("lut").get<std::string>();
    if (l != kBuiltinLutName) c.lut_path = l;
    c.maxrgb = j.at("maxrgb").get<bool>();
    c.bits = j.at("bits").get<int>();
    return c;
}

void run_target(const TargetCfg& c) {
    const Image hdr = load_tagged(c.input, "bt2020", "pq");
    HtmpConfig cfg;
    cfg.a = c.a;
    cfg.b = c.b;
    cfg.mu = c.mu;
    cfg.lut = resolve_lut(c.lut_path);
    cfg.radiance_maxrgb = c.maxrgb;
    const HtmpSupervision sup = htmp_supervision(hdr, cfg);
    save_image(sup.target, c.output, c.bits);

    const double n = static_cast<double>(hdr.pixels());
    auto frac = [&](const std::vector<uint8_t>& mask) {
        long cnt = 0;
        for (uint8_t v : mask) cnt += v;
        return static_cast<double>(cnt) / n;
    };
    json side;
    side["alpha"] = sup.cuts.alpha;
    side["beta"] = sup.cuts.beta;
    side["degenerate"] = sup.cuts.degenerate;
    side["fraction_high"] = frac(sup.masks.high);
    side["fraction_mid"] = frac(sup.masks.mid);
    side["fraction_low"] = frac(sup.masks.low);
    const std::string side_path = c.output + ".regions.json";
    write_text(side_path, side.dump(2) + "\n");

    json m = manifest_head("target");
    m["config"] = to_json(c);
    write_manifest(m, {c.input}, {c.output, side_path}, c.output);
}

// ------------------------------------------------------------------ train

struct TrainCliCfg {
    std::string data_dir, real_sdr_dir, output;
    std::string lut_path;
    std::string adversarial = "off";
    uint64_t seed = 0;
    int steps = 200, patch = 64, batch = 4;
    double lr = 1e-4, lambda = 0.01;
    double a = 95.0, b = 5.0, mu = 5000.0;
};

json to_json(const TrainCliCfg& c) {
    json j;
    j["data"] = c.data_dir;
    j["real_sdr"] = c.real_sdr_dir.empty() ? json(nullptr) : json(c.real_sdr_dir);
    j["output"] = c.output;
    j["lut"] = lut_label(c.lut_path);
    j["adversarial"] = c.adversarial;
    j["seed"] = c.seed;
    j["steps"] = c.steps;
    j["patch"] = c.patch;
    j["batch"] = c.batch;
    j["lr"] = c.lr;
    j["lambda"] = c.lambda;
    j["a"] = c.a;
    j["b"] = c.b;
    j["mu"] = c.mu;
    return j;
}

TrainCliCfg train_from_json(const json& j) {
    TrainCliCfg c;
    c.data_dir = j.at("data").get<std::string>();
    if (!j.at("real_sdr").is_null()) c.real_sdr_dir = j.at("real_sdr").get<std::string>();
    c.output = j.at("output").get<std::string>();
    const std::string l = j.at("lut").get<std::string>();
    if (l != kBuiltinLutName) c.lut_path = l;
    c.adversarial = j.at("adversarial").get<std::string>();
    c.seed = j.at("seed").get<uint64_t>();
    c.steps = j.at("steps").get<int>();
    c.patch = j.at("patch").get<int>();
    c.batch = j.at("batch").get<int>();
    c.lr = j.at("lr").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.a = j.at("a").get<double>();
    c.b = j.at("b").get<double>();
    c.mu = j.at("mu").get<double>();
    return c;
}

void run_train(const TrainCliCfg& c) {
    TrainConfig tc;
    tc.seed = c.seed;
    tc.steps = c.steps;
    tc.patch = c.patch;
    tc.batch = c.batch;
    tc.lr = c.lr;
    tc.lambda_adv = c.lambda;
    tc.adversarial = (c.adversarial == "on");
    tc.htmp_a = c.a;
    tc.htmp_b = c.b;
    tc.mu = c.mu;
    if (tc.adversarial && c.real_sdr_dir.empty())
        throw std::runtime_error("--adversarial on requires --real-sdr DIR");

    std::vector<std::string> inputs;
    std::vector<Image> corpus;
    for (const fs::path& p : list_images(c.data_dir)) {
        corpus.push_back(load_image(p, Gamut::BT2020, Transfer::PQ));
        inputs.push_back(p.string());
    }
    std::vector<Image> real_sdr;
    if (tc.adversarial) {
        for (const fs::path& p : list_images(c.real_sdr_dir)) {
            real_sdr.push_back(load_image(p, Gamut::BT709, Transfer::Gamma709));
            inputs.push_back(p.string());
        }
    }
    const Lut3D lut = resolve_lut(c.lut_path);
    const TrainResult res = train(corpus, lut, tc, tc.adversarial ? &real_sdr : nullptr);
    save_weights(res.weights, c.output);
    const std::string trace_path = c.output + ".trace.csv";
    write_trace_csv(res.trace, trace_path);

    json m = manifest_head("train");
    m["config"] = to_json(c);
    write_manifest(m, inputs, {c.output, trace_path}, c.output);
}

// ------------------------------------------------------------------ synth

struct SynthCfg {
    std::string input, weights, output;
    std::string lut_path;
    int bits = 16;
};

json to_json(const SynthCfg& c) {
    json j;
    j["input"] = c.input;
    j["weights"] = c.weights;
    j["output"] = c.output;
    j["lut"] = lut_label(c.lut_path);
    j["bits"] = c.bits;
    return j;
}

SynthCfg synth_from_json(const json& j) {
    SynthCfg c;
    c.input = j.at("input").get<std::string>();
    c.weights = j.at("weights").get<std::string>();
    c.output = j.at("output").get<std::string>();
    const std::string l = j.at("lut").get<std::string>();
    if (l != kBuiltinLutName) c.lut_path = l;
    c.bits = j.at("bits").get<int>();
    return c;
}

void run_synth(const SynthCfg& c) {
    const NetworkWeights w = load_weights(c.weights);
    const Image hdr = load_tagged(c.input, "bt2020", "pq");
    const Lut3D lut = resolve_lut(c.lut_path);
    const std::vector<Image> conds = make_condition_images(hdr, lut);
    const Image out = synth_forward(hdr, conds, w);
    save_image(out, c.output, c.bits);
    json m = manifest_head("synth");
    m["config"] = to_json(c);
    write_manifest(m, {c.input, c.weights}, {c.output}, c.output);
}

// ------------------------------------------------------------------- eval

struct EvalCfg {
    std::string a_dir, b_dir, pairs_csv, output;
    std::string metrics = "psnr,ssim,ciede2000";
    std::string a_gamut = "bt709", a_transfer = "gamma709";
    std::string b_gamut = "bt709", b_transfer = "gamma709";
};

json to_json(const EvalCfg& c) {
    json j;
    j["a"] = c.a_dir.empty() ? json(nullptr) : json(c.a_dir);
    j["b"] = c.b_dir.empty() ? json(nullptr) : json(c.b_dir);
    j["pairs"] = c.pairs_csv.empty() ? json(nullptr) : json(c.pairs_csv);
    j["output"] = c.output;
    j["metrics"] = c.metrics;
    j["a_gamut"] = c.a_gamut;
    j["a_transfer"] = c.a_transfer;
    j["b_gamut"] = c.b_gamut;
    j["b_transfer"] = c.b_transfer;
    return j;
}

EvalCfg eval_from_json(const json& j) {
    EvalCfg c;
    if (!j.at("a").is_null()) c.a_dir = j.at("a").get<std::string>();
    if (!j.at("b").is_null()) c.b_dir = j.at("b").get<std::string>();
    if (!j.at("pairs").is_null()) c.pairs_csv = j.at("pairs").get<std::string>();
    c.output = j.at("output").get<std::string>();
    c.metrics = j.at("metrics").get<std::string>();
    c.a_gamut = j.at("a_gamut").get<std::string>();
    c.a_transfer = j.at("a_transfer").get<std::string>();
    c.b_gamut = j.at("b_gamut").get<std::string>();
    c.b_transfer = j.at("b_transfer").get<std::string>();
    return c;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double eval_metric(const std::string& name, const Image& a, const Image& b) {
    if (name == "psnr") return psnr(a, b);
    if (name == "mpsnr") return mpsnr(a, b);
    if (name == "ssim") return ssim(a, b);
    if (name == "ms-ssim") return ms_ssim(a, b);
    if (name == "ciede2000") return ciede2000(a, b);
    if (name == "deitp") return delta_e_itp(a, b);
    if (name == "tmqi") return tmqi(a, b).q;
    throw std::runtime_error("unknown metric: " + name);
}

void run_eval(const EvalCfg& c) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (!c.pairs_csv.empty()) {
        std::ifstream f(c.pairs_csv);
        if (!f) throw std::runtime_error("cannot read " + c.pairs_csv);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty() || line[0] == '#') continue;
            const size_t comma = line.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error("bad pair row (want a,b): " + line);
            pairs.emplace_back(line.substr(0, comma), line.substr(comma + 1));
        }
        if (pairs.empty()) throw std::runtime_error("no pairs in " + c.pairs_csv);
    } else if (!c.a_dir.empty() && !c.b_dir.empty()) {
        pairs = pair_dirs(c.a_dir, c.b_dir);
    } else {
        throw std::runtime_error("eval needs --pairs FILE or both --a and --b");
    }
    const std::vector<std::string> metric_names = split_list(c.metrics);
    if (metric_names.empty()) throw std::runtime_error("empty metric list");

    std::string csv = "pair";
    for (const auto& mname : metric_names) csv += "," + mname;
    csv += "\n";
    std::vector<double> col_sum(metric_names.size(), 0.0);
    std::vector<std::string> inputs;
    for (const auto& [pa, pb] : pairs) {
        const Image ia = load_tagged(pa.string(), c.a_gamut, c.a_transfer);
        const Image ib = load_tagged(pb.string(), c.b_gamut, c.b_transfer);
        csv += pa.stem().string();
        for (size_t k = 0; k < metric_names.size(); ++k) {
            const double v = eval_metric(metric_names[k], ia, ib);
            col_sum[k] += v;
            csv += "," + num(v);
        }
        csv += "\n";
        inputs.push_back(pa.string());
        inputs.push_back(pb.string());
    }
    csv += "mean";
    for (double s : col_sum) csv += "," + num(s / static_cast<double>(pairs.size()));
    csv += "\n";
    write_text(c.output, csv);

    json m = manifest_head("eval");
    m["config"] = to_json(c);
    write_manifest(m, inputs, {c.output}, c.output);
}

// ---------------------------------------------------------------- analyze

struct AnalyzeCfg {
    std::string hdr_dir, gt_dir, output;
    std::string tmos = "clip,linear,reinhard,hable,mulaw-cgm";
    std::string lut_path;
    double mu = 5000.0;
    double percentile = 99.9;
};

json to_json(const AnalyzeCfg& c) {
    json j;
    j["hdr"] = c.hdr_dir;
    j["gt"] = c.gt_dir;
    j["output"] = c.output;
    j["tmos"] = c.tmos;
    j["lut"] = c.lut_path.empty() ? json(nullptr) : json(c.lut_path);
    j["mu"] = c.mu;
    j["percentile"] = c.percentile;
    return j;
}

AnalyzeCfg analyze_from_json(const json& j) {
    AnalyzeCfg c;
    c.hdr_dir = j.at("hdr").get<std::string>();
    c.gt_dir = j.at("gt").get<std::string>();
    c.output = j.at("output").get<std::string>();
    c.tmos = j.at("tmos").get<std::string>();
    if (!j.at("lut").is_null()) c.lut_path = j.at("lut").get<std::string>();
    c.mu = j.at("mu").get<double>();
    c.percentile = j.at("percentile").get<double>();
    return c;
}

void run_analyze(const AnalyzeCfg& c) {
    const auto pairs = pair_dirs(c.hdr_dir, c.gt_dir);
    std::vector<Image> hdr_set, gt_set;
    std::vector<std::string> inputs;
    for (const auto& [ph, pg] : pairs) {
        hdr_set.push_back(load_image(ph, Gamut::BT2020, Transfer::PQ));
        gt_set.push_back(load_image(pg, Gamut::BT709, Transfer::Gamma709));
        inputs.push_back(ph.string());
        inputs.push_back(pg.string());
    }
    TmoOptions opt;
    opt.mu = c.mu;
    opt.linear_percentile = c.percentile;
    Lut3D lut;
    if (!c.lut_path.empty()) {
        lut = lut_load(c.lut_path);
        opt.lut = &lut;
    }
    const auto rows = analyze_tmos(hdr_set, gt_set, split_list(c.tmos), opt);
    std::string csv = "tmo,mean_tmqi,mean_psnr,mean_ciede2000\n";
    for (const auto& r : rows)
        csv += r.tmo + "," + num(r.mean_tmqi) + "," + num(r.mean_psnr) + "," + num(r.mean_ciede) +
               "\n";
    write_text(c.output, csv);

    json m = manifest_head("analyze");
    m["config"] = to_json(c);
    write_manifest(m, inputs, {c.output}, c.output);
}

// ------------------------------------------------------------------ align

struct AlignCfg {
    std::string a_dir, b_dir, output, apply_dir;
    std::string gamut = "bt709", transfer = "gamma709";
    int radius = 8;
};

json to_json(const AlignCfg& c) {
    json j;
    j["a"] = c.a_dir;
    j["b"] = c.b_dir;
    j["output"] = c.output;
    j["apply"] = c.apply_dir.empty() ? json(nullptr) : json(c.apply_dir);
    j["gamut"] = c.gamut;
    j["transfer"] = c.transfer;
    j["radius"] = c.radius;
    return j;
}

AlignCfg align_from_json(const json& j) {
    AlignCfg c;
    c.a_dir = j.at("a").get<std::string>();
    c.b_dir = j.at("b").get<std::string>();
    c.output = j.at("output").get<std::string>();
    if (!j.at("apply").is_null()) c.apply_dir = j.at("apply").get<std::string>();
    c.gamut = j.at("gamut").get<std::string>();
    c.transfer = j.at("transfer").get<std::string>();
    c.radius = j.at("radius").get<int>();
    return c;
}

void run_align(const AlignCfg& c) {
    const auto pairs = pair_dirs(c.a_dir, c.b_dir);
    if (!c.apply_dir.empty()) fs::create_directories(c.apply_dir);
    std::string csv = "pair,dx,dy,residual_mse\n";
    std::vector<std::string> inputs, outputs;
    for (const auto& [pa, pb] : pairs) {
        const Image ia = load_tagged(pa.string(), c.gamut, c.transfer);
        const Image ib = load_tagged(pb.string(), c.gamut, c.transfer);
        const AlignResult r = align_translation(ia, ib, c.radius);
        csv += pa.stem().string() + "," + std::to_string(r.offset.dx) + "," +
               std::to_string(r.offset.dy) + "," + num(r.residual_mse) + "\n";
        inputs.push_back(pa.string());
        inputs.push_back(pb.string());
        if (!c.apply_dir.empty()) {
            // Shift a onto b's frame and crop both to the overlap.
            const int dx = r.offset.dx, dy = r.offset.dy;
            const int x0 = std::max(0, dx), y0 = std::max(0, dy);
            const int x1 = std::min(ia.width, ib.width + std::min(0, dx));
            const int y1 = std::min(ia.height, ib.height + std::min(0, dy));
            const Image sa = crop(shift(ia, dx, dy), x0, y0, x1 - x0, y1 - y0);
            const Image sb = crop(ib, x0, y0, x1 - x0, y1 - y0);
            const fs::path oa = fs::path(c.apply_dir) / (pa.stem().string() + ".a.png");
            const fs::path ob = fs::path(c.apply_dir) / (pa.stem().string() + ".b.png");
            save_image(sa, oa);
            save_image(sb, ob);
            outputs.push_back(oa.string());
            outputs.push_back(ob.string());
        }
    }
    write_text(c.output, csv);
    outputs.insert(outputs.begin(), c.output);
    json m = manifest_head("align");
    m["config"] = to_json(c);
    write_manifest(m, inputs, outputs, c.output);
}

// -------------------------------------------------------------------- lut

struct LutIdentityCfg {
    std::string output;
    int size = 17;
};

json to_json(const LutIdentityCfg& c) {
    json j;
    j["output"] = c.output;
    j["size"] = c.size;
    return j;
}

LutIdentityCfg lut_identity_from_json(const json& j) {
    LutIdentityCfg c;
    c.output = j.at("output").get<std::string>();
    c.size = j.at("size").get<int>();
    return c;
}

void run_lut_identity(const LutIdentityCfg& c) {
    lut_save(make_identity_lut(c.size), c.output);
    json m = manifest_head("lut make-identity");
    m["config"] = to_json(c);
    write_manifest(m, {}, {c.output}, c.output);
}

struct LutBakeCfg {
    std::string tmo = "hable";
    std::string output;
    int size = 33;
    double mu = 5000.0;
    double exposure = 1.0;   // reinhard/hable
    double clip_white = kClipWhiteLinear;
    double normalizer = 1.0; // linear
};

json to_json(const LutBakeCfg& c) {
    json j;
    j["tmo"] = c.tmo;
    j["output"] = c.output;
    j["size"] = c.size;
    j["mu"] = c.mu;
    j["exposure"] = c.exposure;
    j["clip_white"] = c.clip_white;
    j["normalizer"] = c.normalizer;
    return j;
}

LutBakeCfg lut_bake_from_json(const json& j) {
    LutBakeCfg c;
    c.tmo = j.at("tmo").get<std::string>();
    c.output = j.at("output").get<std::string>();
    c.size = j.at("size").get<int>();
    c.mu = j.at("mu").get<double>();
    c.exposure = j.at("exposure").get<double>();
    c.clip_white = j.at("clip_white").get<double>();
    c.normalizer = j.at("normalizer").get<double>();
    return c;
}

void run_lut_bake(const LutBakeCfg& c) {
    PixelCurve curve;
    if (c.tmo == "clip")
        curve = clip_curve(c.clip_white);
    else if (c.tmo == "linear")
        curve = linear_curve(c.normalizer);
    else if (c.tmo == "reinhard")
        curve = reinhard_curve(c.exposure);
    else if (c.tmo == "hable")
        curve = hable_curve(c.exposure);
    else if (c.tmo == "mulaw-cgm")
        curve = mulaw_cgm_curve(c.mu);
    else
        throw std::runtime_error("unknown pointwise operator: " + c.tmo);
    lut_save(bake_lut(curve, c.size), c.output);
    json m = manifest_head("lut bake");
    m["config"] = to_json(c);
    write_manifest(m, {}, {c.output}, c.output);
}

// ----------------------------------------------------------------- replay

void run_replay(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("cannot read " + manifest_path);
    json m = json::parse(f, nullptr, true, true);
    const std::string sub = m.at("subcommand").get<std::string>();
    // A --threads flag on replay itself wins over the recorded count.
    if (g_threads_flag == 0 && !m.at("threads").is_null())
        set_thread_count(m.at("threads").get<int>());
    const json& cfg = m.at("config");
    if (sub == "convert")
        run_convert(convert_from_json(cfg));
    else if (sub == "target")
        run_target(target_from_json(cfg));
    else if (sub == "train")
        run_train(train_from_json(cfg));
    else if (sub == "synth")
        run_synth(synth_from_json(cfg));
    else if (sub == "eval")
        run_eval(eval_from_json(cfg));
    else if (sub == "analyze")
        run_analyze(analyze_from_json(cfg));
    else if (sub == "align")
        run_align(align_from_json(cfg));
    else if (sub == "lut make-identity")
        run_lut_identity(lut_identity_from_json(cfg));
    else if (sub == "lut bake")
        run_lut_bake(lut_bake_from_json(cfg));
    else
        throw std::runtime_error("manifest names unknown subcommand: " + sub);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HDR->SDR synthesis pipeline"};
    app.set_version_flag("--version", std::string("hdrsynth ") + kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--threads", g_threads_flag,
                   "worker threads (overrides HDRSYNTH_THREADS; default: logical cores)");

    ConvertCfg convert_cfg;
    auto* convert = app.add_subcommand("convert", "tone-map an HDR image to SDR");
    convert->add_option("-i,--input", convert_cfg.input, "input image (.png/.pfm)")->required();
    convert->add_option("-o,--output", convert_cfg.output, "output image")->required();
    convert
        ->add_option("--tmo", convert_cfg.tmo,
                     "operator: clip|linear|reinhard|hable|mulaw-cgm|lut [clip]")
        ->check(CLI::IsMember({"clip", "linear", "reinhard", "hable", "mulaw-cgm", "lut"}));
    convert->add_option("--lut", convert_cfg.lut_path, "cube file for --tmo lut");
    convert->add_option("--mu", convert_cfg.mu, "mu-law strength [5000]");
    convert->add_option("--exposure", convert_cfg.exposure,
                        "reinhard/hable exposure [auto from geometric mean]");
    convert->add_option("--clip-white", convert_cfg.clip_white,
                        "clip white in linear light [0.01 = 100 nits]");
    convert->add_option("--percentile", convert_cfg.percentile,
                        "tmo linear normalization percentile [99.9]");
    convert->add_option("--in-gamut", convert_cfg.in_gamut, "input gamut tag [bt2020]");
    convert->add_option("--in-transfer", convert_cfg.in_transfer, "input transfer tag [pq]");
    convert->add_option("--bits", convert_cfg.bits, "PNG bit depth [16]")
        ->check(CLI::IsMember({8, 16}));
    convert->callback([&] { apply_threads(); run_convert(convert_cfg); });

    TargetCfg target_cfg;
    auto* target = app.add_subcommand("target", "write the region-blended supervision image");
    target->add_option("-i,--input", target_cfg.input, "HDR input (BT.2020+PQ)")->required();
    target->add_option("-o,--output", target_cfg.output, "target image output")->required();
    target->add_option("--a", target_cfg.a, "high-region percentile [95]");
    target->add_option("--b", target_cfg.b, "low-region percentile [5]");
    target->add_option("--mu", target_cfg.mu, "mu-law strength [5000]");
    target->add_option("--lut", target_cfg.lut_path, "grading cube file [builtin hable 33^3]");
    target->add_flag("--maxrgb", target_cfg.maxrgb, "rank pixels by max channel, not luminance");
    target->add_option("--bits", target_cfg.bits, "PNG bit depth [16]")
        ->check(CLI::IsMember({8, 16}));
    target->callback([&] { apply_threads(); run_target(target_cfg); });

    TrainCliCfg train_cfg;
    auto* traincmd = app.add_subcommand("train", "train the synthesis network");
    traincmd->add_option("--data", train_cfg.data_dir, "directory of HDR images")->required();
    traincmd->add_option("--real-sdr", train_cfg.real_sdr_dir,
                         "directory of real SDR images (adversarial mode)");
    traincmd->add_option("-o,--output", train_cfg.output, "weights output file")->required();
    traincmd->add_option("--steps", train_cfg.steps, "optimizer steps [200]");
    traincmd->add_option("--lr", train_cfg.lr, "learning rate [1e-4]");
    traincmd->add_option("--lambda", train_cfg.lambda, "adversarial weight [0.01]");
    traincmd->add_option("--seed", train_cfg.seed, "init/crop seed [0]");
    traincmd->add_option("--adversarial", train_cfg.adversarial, "on|off [off]")
        ->check(CLI::IsMember({"on", "off"}));
    traincmd->add_option("--patch", train_cfg.patch, "training crop size [64]");
    traincmd->add_option("--batch", train_cfg.batch, "batch size [4]");
    traincmd->add_option("--a", train_cfg.a, "high-region percentile [95]");
    traincmd->add_option("--b", train_cfg.b, "low-region percentile [5]");
    traincmd->add_option("--mu", train_cfg.mu, "mu-law strength [5000]");
    traincmd->add_option("--lut", train_cfg.lut_path, "grading cube file [builtin hable 33^3]");
    traincmd->callback([&] { apply_threads(); run_train(train_cfg); });

    SynthCfg synth_cfg;
    auto* synth = app.add_subcommand("synth", "run the synthesis network on an HDR image");
    synth->add_option("-i,--input", synth_cfg.input, "HDR input (BT.2020+PQ)")->required();
    synth->add_option("-w,--weights", synth_cfg.weights, "weights file")->required();
    synth->add_option("-o,--output", synth_cfg.output, "SDR output image")->required();
    synth->add_option("--lut", synth_cfg.lut_path,
                      "condition grading cube file [builtin hable 33^3]");
    synth->add_option("--bits", synth_cfg.bits, "PNG bit depth [16]")
        ->check(CLI::IsMember({8, 16}));
    synth->callback([&] { apply_threads(); run_synth(synth_cfg); });

    EvalCfg eval_cfg;
    auto* evalcmd = app.add_subcommand("eval", "full-reference metric report");
    evalcmd->add_option("--a", eval_cfg.a_dir, "first image directory");
    evalcmd->add_option("--b", eval_cfg.b_dir, "second image directory");
    evalcmd->add_option("--pairs", eval_cfg.pairs_csv, "CSV of a_path,b_path rows");
    evalcmd->add_option("-o,--output", eval_cfg.output, "report CSV")->required();
    evalcmd->add_option("--metrics", eval_cfg.metrics,
                        "comma list: psnr,mpsnr,ssim,ms-ssim,ciede2000,deitp,tmqi");
    evalcmd->add_option("--a-gamut", eval_cfg.a_gamut, "a-side gamut tag [bt709]");
    evalcmd->add_option("--a-transfer", eval_cfg.a_transfer, "a-side transfer tag [gamma709]");
    evalcmd->add_option("--b-gamut", eval_cfg.b_gamut, "b-side gamut tag [bt709]");
    evalcmd->add_option("--b-transfer", eval_cfg.b_transfer, "b-side transfer tag [gamma709]");
    evalcmd->callback([&] { apply_threads(); run_eval(eval_cfg); });

    AnalyzeCfg analyze_cfg;
    auto* analyze = app.add_subcommand("analyze", "per-operator mean TMQI/PSNR/CIEDE table");
    analyze->add_option("--hdr", analyze_cfg.hdr_dir, "HDR directory (BT.2020+PQ)")->required();
    analyze->add_option("--gt", analyze_cfg.gt_dir, "ground-truth SDR directory")->required();
    analyze->add_option("-o,--output", analyze_cfg.output, "scatter CSV")->required();
    analyze->add_option("--tmos", analyze_cfg.tmos, "comma list of operators");
    analyze->add_option("--lut", analyze_cfg.lut_path, "cube file if 'lut' is listed");
    analyze->add_option("--mu", analyze_cfg.mu, "mu-law strength [5000]");
    analyze->add_option("--percentile", analyze_cfg.percentile, "linear percentile [99.9]");
    analyze->callback([&] { apply_threads(); run_analyze(analyze_cfg); });

    AlignCfg align_cfg;
    auto* align = app.add_subcommand("align", "integer-translation registration of image pairs");
    align->add_option("--a", align_cfg.a_dir, "moving image directory")->required();
    align->add_option("--b", align_cfg.b_dir, "reference image directory")->required();
    align->add_option("-o,--output", align_cfg.output, "offsets CSV")->required();
    align->add_option("--radius", align_cfg.radius, "search radius in pixels [8]");
    align->add_option("--apply", align_cfg.apply_dir, "write aligned overlap crops here");
    align->add_option("--gamut", align_cfg.gamut, "gamut tag for both sides [bt709]");
    align->add_option("--transfer", align_cfg.transfer, "transfer tag for both sides [gamma709]");
    align->callback([&] { apply_threads(); run_align(align_cfg); });

    auto* lutcmd = app.add_subcommand("lut", "3D LUT utilities");
    lutcmd->require_subcommand(1);
    LutIdentityCfg lut_id_cfg;
    auto* lutid = lutcmd->add_subcommand("make-identity", "write an identity cube file");
    lutid->add_option("-o,--output", lut_id_cfg.output, "cube output")->required();
    lutid->add_option("--size", lut_id_cfg.size, "lattice size [17]");
    lutid->callback([&] { apply_threads(); run_lut_identity(lut_id_cfg); });
    LutBakeCfg lut_bake_cfg;
    auto* lutbake = lutcmd->add_subcommand("bake", "sample a pointwise operator onto a lattice");
    lutbake->add_option("-o,--output", lut_bake_cfg.output, "cube output")->required();
    lutbake
        ->add_option("--tmo", lut_bake_cfg.tmo, "clip|linear|reinhard|hable|mulaw-cgm [hable]")
        ->check(CLI::IsMember({"clip", "linear", "reinhard", "hable", "mulaw-cgm"}));
    lutbake->add_option("--size", lut_bake_cfg.size, "lattice size [33]");
    lutbake->add_option("--mu", lut_bake_cfg.mu, "mu-law strength [5000]");
    lutbake->add_option("--exposure", lut_bake_cfg.exposure, "reinhard/hable exposure [1.0]");
    lutbake->add_option("--clip-white", lut_bake_cfg.clip_white, "clip white level [0.01]");
    lutbake->add_option("--normalizer", lut_bake_cfg.normalizer, "linear divisor [1.0]");
    lutbake->callback([&] { apply_threads(); run_lut_bake(lut_bake_cfg); });

    std::string replay_manifest;
    auto* replay = app.add_subcommand("replay", "re-run a recorded manifest");
    replay->add_option("-m,--manifest", replay_manifest, "manifest JSON path")->required();
    replay->callback([&] { apply_threads(); run_replay(replay_manifest); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "hdrsynth: error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
