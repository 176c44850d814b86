// Reconstruction-quality metrics: PSNR and windowed SSIM over interleaved
// image buffers, plus binary PGM/PPM and plain-text image I/O.
//
// Both metrics treat the data range as [0,1] and clamp their inputs to that
// range first, since sampler outputs routinely overshoot it. SSIM uses the
// canonical parameters: 11x11 Gaussian window with sigma = 1.5, K1 = 0.01,
// K2 = 0.03, statistics over valid window positions only, channels averaged.

#pragma once

#include <cstddef>
#include <string>

#include "piecewise/common.hpp"

namespace pw {

// Interleaved row-major image: data[(row*width + col)*channels + ch], the
// same pixel layout the degradation operators use. Values are expected in
// [0,1]; metrics clamp, I/O quantizes.
struct ImageBuffer {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    Vec data;
};

// Throws DomainError unless dimensions are positive, the data length is
// height*width*channels, and every value is finite.
void validate_image(const ImageBuffer& img);

// Copy with every value clamped to [0,1].
ImageBuffer clamp01(const ImageBuffer& img);

// Peak signal-to-noise ratio in decibels with unit data range:
// 10*log10(1/MSE). Identical images return +infinity.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Mean structural similarity over all valid 11x11 window positions,
// averaged across channels. Requires min(height, width) >= 11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

// Binary 8-bit PGM (P5, channels = 1) or PPM (P6, channels = 3). Saving
// clamps to [0,1] and quantizes to 0..255; loading maps bytes back to
// value/255. Header comments ('#' lines) are accepted.
ImageBuffer load_image_pnm(const std::string& path);
void save_image_pnm(const std::string& path, const ImageBuffer& img);

// Plain-text format: a "height width channels" header line followed by the
// full-precision values in raster order. Lossless round trip.
ImageBuffer load_image_text(const std::string& path);
void save_image_text(const std::string& path, const ImageBuffer& img);

}  // namespace pw
