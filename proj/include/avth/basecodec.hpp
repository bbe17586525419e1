#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avth/frame.hpp"

namespace avth {

enum class ChunkKind : uint8_t { Intra = 0, LowDelay = 1 };

struct QpConfig {
    int keyframe_qp = 30;
    int aux_qp = 40;
    int downsample_factor = 4;

    // aux_qp < keyframe_qp is legal but unusual (keyframes are meant to get
    // the higher quality); returns true when that happens so callers can warn.
    bool aux_quality_exceeds_keyframe() const { return aux_qp < keyframe_qp; }
};

// One coded frame. serialize() produces the wire layout (little-endian):
//   kind u8, qp u8, width u16, height u16, pad_right u8, pad_bottom u8,
//   then the entropy-coded coefficient stream.
struct CodedChunk {
    ChunkKind kind = ChunkKind::Intra;
    int qp = 30;
    int width = 0;   // source dimensions before padding
    int height = 0;
    int pad_right = 0;
    int pad_bottom = 0;
    std::vector<uint8_t> stream;

    std::vector<uint8_t> serialize() const;
    static CodedChunk parse(const uint8_t* data, size_t len);
    static CodedChunk parse(const std::vector<uint8_t>& bytes) {
        return parse(bytes.data(), bytes.size());
    }
};

// Quantizer step, doubling every 6 QP: step = 2^((qp-4)/6).
double quant_step(int qp);

// 8x8 block DCT codec over 4:2:0 frames: float DCT-II, uniform quantization
// with halves rounded away from zero, zigzag scan, zero run-lengths, signed
// exp-Golomb. The decoder inverts the exact same arithmetic.
CodedChunk encode_intra(const Frame& frame, int qp);
Frame decode_intra(const CodedChunk& chunk);

// Frame 0 is coded intra; each later frame codes its residual against the
// previous reconstruction, biased by +128 and clamped into the 8-bit path.
std::vector<CodedChunk> encode_lowdelay(const FrameSequence& frames, int qp);
FrameSequence decode_lowdelay(const std::vector<CodedChunk>& chunks, Rational fps);

// Box-filter average down; Catmull-Rom bicubic up.
Frame downsample(const Frame& frame, int factor);
Frame upsample(const Frame& frame, int factor);

// General bicubic resize used by upsample and facial SR.
Frame resize_bicubic(const Frame& frame, int out_w, int out_h);

// Shell hook for external reference encoders. The template must contain
// {input}, {output} and {qp} placeholders; {input} receives a temporary Y4M
// path and the bytes written to {output} become the chunk payload.
CodedChunk external_encode(const FrameSequence& frames, ChunkKind role, int qp,
                           const std::string& command_template);
FrameSequence external_decode(const CodedChunk& chunk, const std::string& command_template);

}  // namespace avth
