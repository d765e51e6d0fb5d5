#pragma once

#include "flowlab/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flowlab {

/// 8-bit grayscale image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Deterministic grayscale PNG writer (fixed settings, no ancillary chunks).
void write_png(const std::string& path, const GrayImage& img);

/// Reads PNG (any color type, converted to 8-bit luminance grayscale) or
/// binary PGM. Throws on undecodable input.
GrayImage read_image(const std::string& path);

enum class ResampleEdge { Periodic, Clamp };

/// Bilinear resample to out_w × out_h, ignoring aspect ratio.
std::vector<double> resample_bilinear(const std::vector<double>& src, int src_w, int src_h,
                                      int out_w, int out_h, ResampleEdge edge);

/// Square image interpreted as a real field on a 2π box (for spectra and
/// Fourier statistics of rendered images).
RealField image_to_field(const GrayImage& img);

} // namespace flowlab
