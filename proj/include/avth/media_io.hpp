#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "avth/frame.hpp"

namespace avth {

// YUV4MPEG2, 4:2:0 only. Header and per-frame parameter tails are preserved
// so write_y4m(read_y4m(f)) is byte-identical for conforming files.
FrameSequence read_y4m(const std::string& path);
void write_y4m(const FrameSequence& seq, const std::string& path);

// RIFF/WAVE, PCM 16-bit. Stereo is downmixed to mono by per-sample average
// with halves rounded away from zero.
AudioClip read_wav(const std::string& path);
void write_wav(const AudioClip& clip, const std::string& path);

// Binary PGM (P5) / PPM (P6) stills, maxval 255.
Frame read_pnm(const std::string& path);
void write_pnm(const Frame& frame, const std::string& path);

// BT.601 full-range conversion, clamped to [0,255].
std::array<uint8_t, 3> yuv_to_rgb_px(uint8_t y, uint8_t cb, uint8_t cr);
std::array<uint8_t, 3> rgb_to_yuv_px(uint8_t r, uint8_t g, uint8_t b);

// Frame-level conversion. 4:2:0 chroma is replicated 2x2 on the way up and
// box-averaged on the way down.
Frame yuv_to_rgb(const Frame& frame);
Frame rgb_to_yuv(const Frame& frame);

}  // namespace avth
