#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace avth {

enum class ColorTag : uint8_t {
    YCbCr420,  // planar Y, Cb, Cr with 2x2 chroma subsampling
    Rgb,       // planar R, G, B at full resolution
    Gray,      // single plane
};

// One raster image. Plane geometry is fully determined by (width, height,
// color); validate() checks the stored planes against it.
struct Frame {
    int width = 0;
    int height = 0;
    ColorTag color = ColorTag::YCbCr420;
    std::vector<std::vector<uint8_t>> planes;

    static Frame make(int width, int height, ColorTag color, uint8_t fill = 0);

    int plane_count() const;
    int plane_width(int p) const;
    int plane_height(int p) const;

    uint8_t at(int p, int y, int x) const {
        return planes[p][static_cast<size_t>(y) * plane_width(p) + x];
    }
    uint8_t& at(int p, int y, int x) {
        return planes[p][static_cast<size_t>(y) * plane_width(p) + x];
    }

    void validate() const;  // throws ShapeError on inconsistency

    bool same_geometry(const Frame& o) const {
        return width == o.width && height == o.height && color == o.color;
    }
};

struct Rational {
    uint32_t num = 25;
    uint32_t den = 1;
    double value() const { return static_cast<double>(num) / den; }
};

struct FrameSequence {
    std::vector<Frame> frames;
    Rational fps;

    // Raw Y4M header text after the magic and per-frame parameter tails,
    // preserved so a parsed file can be rewritten byte-identically. Empty
    // for sequences built in memory.
    std::string y4m_header_tail;
    std::vector<std::string> y4m_frame_tails;

    size_t size() const { return frames.size(); }
    void validate() const;  // all frames share geometry, fps > 0
};

struct AudioClip {
    std::vector<int16_t> samples;  // mono PCM
    int sample_rate = 0;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

}  // namespace avth
