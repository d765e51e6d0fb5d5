#include "flowlab/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace flowlab {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("read_image: unsupported PGM flavor in " + path);
    int w = 0, h = 0, maxval = 0;
    auto next_int = [&](int& out) {
        // skip whitespace and comment lines
        for (;;) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        in >> out;
    };
    next_int(w);
    next_int(h);
    next_int(maxval);
    in.get(); // single whitespace before payload
    if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("read_image: malformed PGM header in " + path);

    GrayImage img(w, h);
    if (maxval < 256) {
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(img.pixels.size()));
    } else {
        std::vector<unsigned char> raw(img.pixels.size() * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const int v = (raw[2 * i] << 8) | raw[2 * i + 1];
            img.pixels[i] = static_cast<std::uint8_t>(v * 255 / maxval);
        }
    }
    if (!in) throw std::runtime_error("read_image: truncated PGM payload in " + path);
    return img;
}

} // namespace

void write_png(const std::string& path, const GrayImage& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: encode error for " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() +
                                                 static_cast<std::size_t>(y) * img.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage read_image(const std::string& path) {
    {
        std::ifstream probe(path, std::ios::binary);
        char head[2] = {0, 0};
        probe.read(head, 2);
        if (probe && head[0] == 'P' && head[1] == '5') return read_pgm(path);
    }

    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_image: cannot open " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::runtime_error("read_image: not a PNG or PGM file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_image: decode error for " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // normalize every color type to 8-bit luminance grayscale
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1.0, -1.0);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    GrayImage img(w, h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::vector<double> resample_bilinear(const std::vector<double>& src, int src_w, int src_h,
                                      int out_w, int out_h, ResampleEdge edge) {
    std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
    const double sx_scale = static_cast<double>(src_w) / out_w;
    const double sy_scale = static_cast<double>(src_h) / out_h;

    auto sample = [&](int y, int x) {
        if (edge == ResampleEdge::Periodic) {
            y = ((y % src_h) + src_h) % src_h;
            x = ((x % src_w) + src_w) % src_w;
        } else {
            y = std::min(std::max(y, 0), src_h - 1);
            x = std::min(std::max(x, 0), src_w - 1);
        }
        return src[static_cast<std::size_t>(y) * src_w + x];
    };

    for (int oy = 0; oy < out_h; ++oy) {
        const double sy = oy * sy_scale;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double sx = ox * sx_scale;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            const double v = (1.0 - fy) * ((1.0 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                             fy * ((1.0 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
            out[static_cast<std::size_t>(oy) * out_w + ox] = v;
        }
    }
    return out;
}

RealField image_to_field(const GrayImage& img) {
    if (img.width != img.height)
        throw std::invalid_argument("image_to_field: image must be square");
    RealField f(Grid2D(img.width));
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        f.data[i] = static_cast<double>(img.pixels[i]);
    return f;
}

} // namespace flowlab
