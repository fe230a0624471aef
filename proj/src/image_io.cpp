#include "frvs/image_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <png.h>

namespace frvs::io {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

void save_png(const Tensor& image, const std::string& path) {
    require(image.rank() == 3 && (image.shape[0] == 1 || image.shape[0] == 3),
            "save_png: expected 1xHxW or 3xHxW, got " + image.shape_str());
    const int C = image.shape[0], H = image.shape[1], W = image.shape[2];

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("save_png: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, W, H, 8, C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<std::size_t>(W) * C);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                float v = image.at(c, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                row[x * C + c] = static_cast<png_byte>(std::floor(v * 255.0f + 0.5f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png: libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize to 8-bit RGB or gray
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int W = static_cast<int>(png_get_image_width(png, info));
    const int H = static_cast<int>(png_get_image_height(png, info));
    const int C = static_cast<int>(png_get_channels(png, info));
    if (C != 1 && C != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png: unsupported channel count in " + path);
    }
    std::vector<png_byte> row(static_cast<std::size_t>(W) * C);
    Tensor out({C, H, W});
    for (int y = 0; y < H; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) out.at(c, y, x) = row[x * C + c] / 255.0f;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_pfm(const Tensor& map, const std::string& path) {
    require(map.rank() == 3 && map.shape[0] == 1,
            "save_pfm: expected 1xHxW, got " + map.shape_str());
    const int H = map.shape[1], W = map.shape[2];
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("save_pfm: cannot open " + path);
    os << "Pf\n" << W << " " << H << "\n-1.0\n";  // negative scale = little-endian
    // PFM stores rows bottom to top
    for (int y = H - 1; y >= 0; --y)
        os.write(reinterpret_cast<const char*>(&map.at(0, y, 0)),
                 static_cast<std::streamsize>(W * sizeof(float)));
    if (!os) fail("save_pfm: write failed: " + path);
}

Tensor load_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("load_pfm: cannot open " + path);
    std::string tag;
    int W = 0, H = 0;
    double scale = 0;
    is >> tag >> W >> H >> scale;
    if (tag != "Pf") fail("load_pfm: only grayscale Pf supported: " + path);
    if (scale >= 0) fail("load_pfm: big-endian PFM not supported: " + path);
    if (W <= 0 || H <= 0) fail("load_pfm: bad dimensions in " + path);
    is.get();  // single whitespace after the header
    Tensor out({1, H, W});
    for (int y = H - 1; y >= 0; --y)
        is.read(reinterpret_cast<char*>(&out.at(0, y, 0)),
                static_cast<std::streamsize>(W * sizeof(float)));
    if (!is) fail("load_pfm: truncated file: " + path);
    return out;
}

namespace {
constexpr float kFloMagic = 202021.25f;  // spells "PIEH" in ASCII
}

void save_flo(const Tensor& flow, const std::string& path) {
    require(flow.rank() == 3 && flow.shape[0] == 2,
            "save_flo: expected 2xHxW, got " + flow.shape_str());
    const int H = flow.shape[1], W = flow.shape[2];
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("save_flo: cannot open " + path);
    os.write(reinterpret_cast<const char*>(&kFloMagic), 4);
    int32_t wh[2] = {W, H};
    os.write(reinterpret_cast<const char*>(wh), 8);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float uv[2] = {flow.at(0, y, x), flow.at(1, y, x)};
            os.write(reinterpret_cast<const char*>(uv), 8);
        }
    if (!os) fail("save_flo: write failed: " + path);
}

Tensor load_flo(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("load_flo: cannot open " + path);
    float magic = 0;
    is.read(reinterpret_cast<char*>(&magic), 4);
    if (magic != kFloMagic) fail("load_flo: bad magic in " + path);
    int32_t wh[2];
    is.read(reinterpret_cast<char*>(wh), 8);
    if (wh[0] <= 0 || wh[1] <= 0) fail("load_flo: bad dimensions in " + path);
    Tensor out({2, wh[1], wh[0]});
    for (int y = 0; y < wh[1]; ++y)
        for (int x = 0; x < wh[0]; ++x) {
            float uv[2];
            is.read(reinterpret_cast<char*>(uv), 8);
            out.at(0, y, x) = uv[0];
            out.at(1, y, x) = uv[1];
        }
    if (!is) fail("load_flo: truncated file: " + path);
    return out;
}

}  // namespace frvs::io
