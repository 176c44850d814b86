#include "piecewise/metrics.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace pw {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;  // (K2 * L)^2

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw DomainError("image shapes do not match");
}

// Normalized 1-D Gaussian tap weights; the 2-D window is their outer
// product, so separable passes reproduce the full window exactly.
const std::array<double, kWindow>& window_taps() {
    static const std::array<double, kWindow> taps = [] {
        std::array<double, kWindow> w{};
        double total = 0.0;
        for (std::size_t i = 0; i < kWindow; ++i) {
            const double d = static_cast<double>(i) - 5.0;
            w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            total += w[i];
        }
        for (double& v : w) v /= total;
        return w;
    }();
    return taps;
}

// Valid-region separable filter of one h x w plane: output is
// (h - 10) x (w - 10), no padding.
Vec filter_plane(const Vec& plane, std::size_t h, std::size_t w) {
    const auto& taps = window_taps();
    const std::size_t wo = w - (kWindow - 1);
    const std::size_t ho = h - (kWindow - 1);
    Vec horiz(h * wo);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < wo; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * plane[r * w + c + k];
            horiz[r * wo + c] = acc;
        }
    Vec out(ho * wo);
    for (std::size_t r = 0; r < ho; ++r)
        for (std::size_t c = 0; c < wo; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * horiz[(r + k) * wo + c];
            out[r * wo + c] = acc;
        }
    return out;
}

}  // namespace

void validate_image(const ImageBuffer& img) {
    if (img.height == 0 || img.width == 0 || img.channels == 0)
        throw DomainError("image dimensions must be positive");
    if (img.data.size() != img.height * img.width * img.channels)
        throw DomainError("image data length does not match dimensions");
    for (double v : img.data)
        if (!std::isfinite(v)) throw DomainError("image contains non-finite values");
}

ImageBuffer clamp01(const ImageBuffer& img) {
    validate_image(img);
    ImageBuffer out = img;
    for (double& v : out.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return out;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_shape(a, b);
    const ImageBuffer ca = clamp01(a);
    const ImageBuffer cb = clamp01(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < ca.data.size(); ++i) {
        const double d = ca.data[i] - cb.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ca.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_shape(a, b);
    if (a.height < kWindow || a.width < kWindow)
        throw DomainError("image smaller than the 11x11 SSIM window");
    const ImageBuffer ca = clamp01(a);
    const ImageBuffer cb = clamp01(b);

    const std::size_t h = a.height, w = a.width, c = a.channels;
    const std::size_t wo = w - (kWindow - 1);
    const std::size_t ho = h - (kWindow - 1);

    double channel_sum = 0.0;
    Vec pa(h * w), pb(h * w), paa(h * w), pbb(h * w), pab(h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < h * w; ++i) {
            const double x = ca.data[i * c + ch];
            const double y = cb.data[i * c + ch];
            pa[i] = x;
            pb[i] = y;
            paa[i] = x * x;
            pbb[i] = y * y;
            pab[i] = x * y;
        }
        const Vec mu_a = filter_plane(pa, h, w);
        const Vec mu_b = filter_plane(pb, h, w);
        const Vec m_aa = filter_plane(paa, h, w);
        const Vec m_bb = filter_plane(pbb, h, w);
        const Vec m_ab = filter_plane(pab, h, w);

        double acc = 0.0;
        for (std::size_t i = 0; i < ho * wo; ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = m_aa[i] - ma * ma;
            const double vb = m_bb[i] - mb * mb;
            const double cov = m_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                   ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        }
        channel_sum += acc / static_cast<double>(ho * wo);
    }
    return channel_sum / static_cast<double>(c);
}

ImageBuffer load_image_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("load_image_pnm: cannot open '" + path + "'");

    // Header tokens separated by whitespace, with '#' comments running to
    // end of line. The single whitespace after the maxval token is consumed
    // by the tokenizer, leaving the stream at the raster.
    auto next_token = [&]() -> std::string {
        int ch = in.get();
        while (ch != EOF) {
            if (ch == '#') {
                while (ch != EOF && ch != '\n') ch = in.get();
                ch = in.get();
                continue;
            }
            if (!std::isspace(ch)) break;
            ch = in.get();
        }
        if (ch == EOF) throw DomainError("load_image_pnm: truncated header in '" + path + "'");
        std::string tok;
        while (ch != EOF && !std::isspace(ch)) {
            tok.push_back(static_cast<char>(ch));
            ch = in.get();
        }
        return tok;
    };
    auto next_number = [&]() -> std::size_t {
        const std::string tok = next_token();
        std::size_t value = 0;
        for (char ch : tok) {
            if (!std::isdigit(static_cast<unsigned char>(ch)))
                throw DomainError("load_image_pnm: malformed header in '" + path + "'");
            value = value * 10 + static_cast<std::size_t>(ch - '0');
        }
        if (tok.empty()) throw DomainError("load_image_pnm: malformed header in '" + path + "'");
        return value;
    };

    const std::string magic = next_token();
    ImageBuffer img;
    if (magic == "P5")
        img.channels = 1;
    else if (magic == "P6")
        img.channels = 3;
    else
        throw DomainError("load_image_pnm: unsupported format '" + magic + "' in '" + path + "'");

    img.width = next_number();
    img.height = next_number();
    const std::size_t maxval = next_number();
    if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 255)
        throw DomainError("load_image_pnm: bad dimensions or maxval in '" + path + "'");

    const std::size_t count = img.height * img.width * img.channels;
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw DomainError("load_image_pnm: truncated raster in '" + path + "'");

    img.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        img.data[i] = static_cast<double>(raw[i]) / static_cast<double>(maxval);
    return img;
}

void save_image_pnm(const std::string& path, const ImageBuffer& img) {
    validate_image(img);
    if (img.channels != 1 && img.channels != 3)
        throw DomainError("save_image_pnm: only 1 (PGM) or 3 (PPM) channels supported");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("save_image_pnm: cannot open '" + path + "' for writing");
    out << (img.channels == 1 ? "P5" : "P6") << '\n'
        << img.width << ' ' << img.height << '\n'
        << "255\n";

    std::vector<unsigned char> raw(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = img.data[i] < 0.0 ? 0.0 : (img.data[i] > 1.0 ? 1.0 : img.data[i]);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw NumericalError("save_image_pnm: write failed for '" + path + "'");
}

ImageBuffer load_image_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("load_image_text: cannot open '" + path + "'");
    ImageBuffer img;
    if (!(in >> img.height >> img.width >> img.channels))
        throw DomainError("load_image_text: malformed header in '" + path + "'");
    if (img.height == 0 || img.width == 0 || img.channels == 0)
        throw DomainError("load_image_text: bad dimensions in '" + path + "'");
    const std::size_t count = img.height * img.width * img.channels;
    img.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        if (!(in >> img.data[i]))
            throw DomainError("load_image_text: truncated data in '" + path + "'");
    return img;
}

void save_image_text(const std::string& path, const ImageBuffer& img) {
    validate_image(img);
    std::ofstream out(path);
    if (!out) throw DomainError("save_image_text: cannot open '" + path + "' for writing");
    out << img.height << ' ' << img.width << ' ' << img.channels << '\n';
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        out << format_full(img.data[i]);
        out << ((i + 1) % img.width == 0 ? '\n' : ' ');
    }
    if (!out) throw NumericalError("save_image_text: write failed for '" + path + "'");
}

}  // namespace pw
