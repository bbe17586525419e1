#pragma once

#include <cstdint>
#include <vector>

#include "avth/config.hpp"
#include "avth/frame.hpp"

namespace avth {

struct EncodeSummary {
    uint64_t total_bytes = 0;
    uint64_t audio_payload_bytes = 0;
    uint32_t gop_count = 0;
    double video_kbps = 0;
    double total_kbps = 0;
};

// GOP split, keyframe intra coding, auxiliary downsample + low-delay coding,
// per-GOP PCM audio slices, container mux.
std::vector<uint8_t> encode_stream(const FrameSequence& video, const AudioClip& audio,
                                   const Config& cfg, EncodeSummary* summary = nullptr);

struct DecodeResult {
    FrameSequence video;      // 4:2:0, keyframes bit-identical to their intra decodes
    AudioClip audio;
    FrameSequence tr_frames;  // Stage-I output (RGB), filled when want_tr
};

// motion_dump_dir, when nonempty, receives one f32 sidecar per GOP
// (motion_gopNNNN.f32: x_key then each x_trg, K*3 floats per set).
DecodeResult decode_stream(const std::vector<uint8_t>& bytes, const Config& cfg,
                           bool want_tr = false, const std::string& motion_dump_dir = "");

}  // namespace avth
