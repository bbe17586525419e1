#pragma once

#include <cstdint>
#include <vector>

#include "avth/basecodec.hpp"
#include "avth/frame.hpp"
#include "avth/gop.hpp"

namespace avth {

// Fixed-size little-endian stream header; see docs/FORMAT.md for the
// annotated byte layout.
struct ContainerMeta {
    uint16_t width = 0;
    uint16_t height = 0;
    uint16_t fps_num = 25;
    uint16_t fps_den = 1;
    uint32_t total_frames = 0;
    uint16_t gop_size = 30;
    uint8_t keyframe_qp = 30;
    uint8_t aux_qp = 40;
    uint8_t downsample_factor = 4;
    uint32_t audio_rate = 0;
    uint8_t audio_codec = 0;  // 0 = PCM16, 1 = external
};

constexpr size_t kContainerHeaderSize = 31;
constexpr size_t kGopFramingSize = 12;  // three u32 length prefixes
constexpr uint8_t kContainerVersion = 1;

// Per-GOP payload blobs: the serialized keyframe chunk, the packed auxiliary
// chunk list, and the audio slice.
std::vector<uint8_t> mux(const GopPlan& plan, const std::vector<std::vector<uint8_t>>& key_chunks,
                         const std::vector<std::vector<uint8_t>>& aux_chunks,
                         const std::vector<std::vector<uint8_t>>& audio_chunks,
                         const ContainerMeta& meta);

struct GopPayload {
    std::vector<uint8_t> key, aux, audio;
};

struct DemuxResult {
    ContainerMeta meta;
    GopPlan plan;
    std::vector<GopPayload> gops;
};

DemuxResult demux(const std::vector<uint8_t>& bytes);

// Auxiliary blob layout: u32 chunk count, then u32 length + chunk bytes each.
std::vector<uint8_t> pack_chunk_list(const std::vector<CodedChunk>& chunks);
std::vector<CodedChunk> unpack_chunk_list(const std::vector<uint8_t>& blob);

// 8 * bytes / (1000 * duration), duration = total_frames / fps.
double kbps(uint64_t total_bytes, uint32_t total_frames, Rational fps);

}  // namespace avth
