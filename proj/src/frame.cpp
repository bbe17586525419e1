#include "avth/frame.hpp"

#include "avth/error.hpp"

namespace avth {

Frame Frame::make(int width, int height, ColorTag color, uint8_t fill) {
    if (width <= 0 || height <= 0) throw ShapeError("frame dimensions must be positive");
    if (color == ColorTag::YCbCr420 && (width % 2 || height % 2))
        throw ShapeError("4:2:0 frames need even dimensions");
    Frame f;
    f.width = width;
    f.height = height;
    f.color = color;
    f.planes.resize(f.plane_count());
    for (int p = 0; p < f.plane_count(); ++p)
        f.planes[p].assign(static_cast<size_t>(f.plane_width(p)) * f.plane_height(p), fill);
    return f;
}

int Frame::plane_count() const {
    return color == ColorTag::Gray ? 1 : 3;
}

int Frame::plane_width(int p) const {
    if (color == ColorTag::YCbCr420 && p > 0) return width / 2;
    return width;
}

int Frame::plane_height(int p) const {
    if (color == ColorTag::YCbCr420 && p > 0) return height / 2;
    return height;
}

void Frame::validate() const {
    if (width <= 0 || height <= 0) throw ShapeError("frame dimensions must be positive");
    if (color == ColorTag::YCbCr420 && (width % 2 || height % 2))
        throw ShapeError("4:2:0 frames need even dimensions");
    if (static_cast<int>(planes.size()) != plane_count())
        throw ShapeError("wrong plane count for color tag");
    for (int p = 0; p < plane_count(); ++p) {
        size_t want = static_cast<size_t>(plane_width(p)) * plane_height(p);
        if (planes[p].size() != want) throw ShapeError("plane size does not match frame geometry");
    }
}

void FrameSequence::validate() const {
    if (fps.num == 0 || fps.den == 0) throw ShapeError("fps must be positive");
    for (const Frame& f : frames) {
        f.validate();
        if (!f.same_geometry(frames.front()))
            throw ShapeError("all frames in a sequence must share geometry");
    }
}

}  // namespace avth
