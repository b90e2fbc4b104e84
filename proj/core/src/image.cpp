#include "hdrsynth/image.hpp"

#include "hdrsynth/parallel.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace hdrsynth {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_ext(const std::filesystem::path& p, const char* ext) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

Image load_png(const std::filesystem::path& path, Gamut gamut, Transfer transfer) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("png decode failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("not a 3-channel RGB PNG: " + path.string());
    }
    if (depth != 8 && depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("unsupported PNG bit depth " + std::to_string(depth) + ": " + path.string());
    }

    size_t stride = png_get_rowbytes(png, info);
    std::vector<unsigned char> raw(stride * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(w), static_cast<int>(h), gamut, transfer);
    const long samples = img.pixels() * 3;
    if (depth == 8) {
        const float scale = 1.0f / 255.0f;
        for (long i = 0; i < samples; ++i) img.data[static_cast<size_t>(i)] = raw[static_cast<size_t>(i)] * scale;
    } else {
        // PNG 16-bit samples are big-endian on disk.
        const float scale = 1.0f / 65535.0f;
        for (long i = 0; i < samples; ++i) {
            unsigned hi = raw[static_cast<size_t>(2 * i)];
            unsigned lo = raw[static_cast<size_t>(2 * i) + 1];
            img.data[static_cast<size_t>(i)] = static_cast<float>((hi << 8) | lo) * scale;
        }
    }
    return img;
}

void save_png(const Image& img, const std::filesystem::path& path, int bits) {
    if (bits != 8 && bits != 16) fail("save_image: bits must be 8 or 16");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) fail("cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("png encode failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 bits, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const long samples = img.pixels() * 3;
    const double maxcode = bits == 8 ? 255.0 : 65535.0;
    std::vector<unsigned char> raw(static_cast<size_t>(samples) * (bits == 8 ? 1 : 2));
    for (long i = 0; i < samples; ++i) {
        double v = std::clamp(static_cast<double>(img.data[static_cast<size_t>(i)]), 0.0, 1.0);
        auto code = static_cast<unsigned>(std::floor(v * maxcode + 0.5));
        if (bits == 8) {
            raw[static_cast<size_t>(i)] = static_cast<unsigned char>(code);
        } else {
            raw[static_cast<size_t>(2 * i)] = static_cast<unsigned char>(code >> 8);
            raw[static_cast<size_t>(2 * i) + 1] = static_cast<unsigned char>(code & 0xff);
        }
    }
    size_t stride = static_cast<size_t>(img.width) * 3 * (bits == 8 ? 1 : 2);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = raw.data() + static_cast<size_t>(y) * stride;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// PFM: "PF\n<w> <h>\n<scale>\n" + float rows bottom-to-top; negative scale
// means little-endian samples.
Image load_pfm(const std::filesystem::path& path, Gamut gamut, Transfer transfer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (magic != "PF" || w <= 0 || h <= 0 || scale == 0.0) fail("bad PFM header: " + path.string());
    in.get(); // single whitespace after the header

    Image img(w, h, gamut, transfer);
    std::vector<float> row(static_cast<size_t>(w) * 3);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) fail("truncated PFM: " + path.string());
        if (scale > 0.0) { // big-endian file
            for (float& v : row) {
                uint32_t u;
                std::memcpy(&u, &v, 4);
                u = __builtin_bswap32(u);
                std::memcpy(&v, &u, 4);
            }
        }
        std::memcpy(img.px(0, y), row.data(), row.size() * sizeof(float));
    }
    return img;
}

void save_pfm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path.string());
    out << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(img.px(0, y)),
                  static_cast<std::streamsize>(static_cast<size_t>(img.width) * 3 * sizeof(float)));
    if (!out) fail("write failed: " + path.string());
}

} // namespace

Image sanitize(Image img) {
    if (img.data.size() != static_cast<size_t>(img.pixels()) * 3)
        fail("image data length mismatch");
    bool clamp = img.transfer != Transfer::Linear;
    for (float& v : img.data) {
        if (!std::isfinite(v)) fail("image contains non-finite values");
        if (clamp) v = std::clamp(v, 0.0f, 1.0f);
    }
    return img;
}

Image load_image(const std::filesystem::path& path, Gamut gamut, Transfer transfer) {
    Image img = has_ext(path, ".pfm") ? load_pfm(path, gamut, transfer)
                                      : load_png(path, gamut, transfer);
    return sanitize(std::move(img));
}

void save_image(const Image& img, const std::filesystem::path& path, int bits) {
    if (has_ext(path, ".pfm"))
        save_pfm(img, path);
    else
        save_png(img, path, bits);
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > img.width || y0 + h > img.height)
        fail("crop window out of bounds");
    Image out(w, h, img.gamut, img.transfer);
    for (int y = 0; y < h; ++y)
        std::memcpy(out.px(0, y), img.px(x0, y0 + y), static_cast<size_t>(w) * 3 * sizeof(float));
    return out;
}

Image shift(const Image& img, int dx, int dy) {
    Image out(img.width, img.height, img.gamut, img.transfer);
    for (int y = 0; y < img.height; ++y) {
        int sy = y - dy;
        if (sy < 0 || sy >= img.height) continue;
        int x0 = std::max(0, dx);
        int x1 = std::min(img.width, img.width + dx);
        if (x0 >= x1) continue;
        std::memcpy(out.px(x0, y), img.px(x0 - dx, sy),
                    static_cast<size_t>(x1 - x0) * 3 * sizeof(float));
    }
    return out;
}

AlignResult align_translation(const Image& a, const Image& b, int radius) {
    if (!a.same_shape(b) || !a.same_tags(b)) fail("align_translation: image mismatch");
    if (radius < 1) fail("align_translation: radius must be >= 1");
    if (a.width - radius < 16 || a.height - radius < 16)
        fail("align_translation: overlap under 16x16 at maximal shift");

    const int span = 2 * radius + 1;
    std::vector<double> mse(static_cast<size_t>(span) * span);

    // Candidates are independent; each worker fills its own slots and the
    // final argmin is a serial scan in the tie-break order.
    parallel_chunks(static_cast<long>(span) * span, [&](long lo, long hi) {
        for (long idx = lo; idx < hi; ++idx) {
            int dy = static_cast<int>(idx) / span - radius;
            int dx = static_cast<int>(idx) % span - radius;
            int x0 = std::max(0, dx), x1 = std::min(a.width, a.width + dx);
            int y0 = std::max(0, dy), y1 = std::min(a.height, a.height + dy);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
                const float* pa = a.px(x0 - dx, y - dy);
                const float* pb = b.px(x0, y);
                const long n = static_cast<long>(x1 - x0) * 3;
                for (long i = 0; i < n; ++i) {
                    double d = static_cast<double>(pa[i]) - pb[i];
                    acc += d * d;
                }
            }
            mse[static_cast<size_t>(idx)] =
                acc / (static_cast<double>(x1 - x0) * (y1 - y0) * 3.0);
        }
    });

    AlignResult best;
    bool first = true;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            double v = mse[static_cast<size_t>(dy + radius) * span + (dx + radius)];
            auto key = [](double m, int x, int y) {
                return std::make_tuple(m, std::abs(x) + std::abs(y), y, x);
            };
            if (first || key(v, dx, dy) < key(best.residual_mse, best.offset.dx, best.offset.dy)) {
                best = {{dx, dy}, v};
                first = false;
            }
        }
    }
    return best;
}

} // namespace hdrsynth
