#include "avth/container.hpp"

#include <cstring>
#include <string>

#include "avth/error.hpp"

namespace avth {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

struct Cursor {
    const uint8_t* p;
    size_t left;

    void need(size_t n, const char* what) {
        if (left < n) throw FormatError(std::string("container truncated reading ") + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        uint8_t v = *p;
        ++p;
        --left;
        return v;
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        left -= 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                     (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
        p += 4;
        left -= 4;
        return v;
    }
};

uint32_t expected_gop_count(uint32_t total_frames, uint16_t gop_size) {
    if (total_frames == 0) return 0;
    return (total_frames + gop_size - 1) / gop_size;
}

}  // namespace

std::vector<uint8_t> mux(const GopPlan& plan, const std::vector<std::vector<uint8_t>>& key_chunks,
                         const std::vector<std::vector<uint8_t>>& aux_chunks,
                         const std::vector<std::vector<uint8_t>>& audio_chunks,
                         const ContainerMeta& meta) {
    size_t gop_count = plan.groups.size();
    if (key_chunks.size() != gop_count || aux_chunks.size() != gop_count ||
        audio_chunks.size() != gop_count)
        throw ShapeError("chunk list lengths must equal the GOP count");
    if (meta.total_frames != plan.total_frames())
        throw ShapeError("meta total_frames disagrees with the GOP plan");
    if (meta.gop_size != plan.gop_size) throw ShapeError("meta gop_size disagrees with the plan");

    std::vector<uint8_t> out;
    out.reserve(kContainerHeaderSize);
    out.insert(out.end(), {'A', 'V', 'T', 'H'});
    out.push_back(kContainerVersion);
    put_u16(out, meta.width);
    put_u16(out, meta.height);
    put_u16(out, meta.fps_num);
    put_u16(out, meta.fps_den);
    put_u32(out, meta.total_frames);
    put_u16(out, meta.gop_size);
    out.push_back(meta.keyframe_qp);
    out.push_back(meta.aux_qp);
    out.push_back(meta.downsample_factor);
    put_u32(out, meta.audio_rate);
    out.push_back(meta.audio_codec);
    put_u32(out, static_cast<uint32_t>(gop_count));

    for (size_t g = 0; g < gop_count; ++g) {
        put_u32(out, static_cast<uint32_t>(key_chunks[g].size()));
        out.insert(out.end(), key_chunks[g].begin(), key_chunks[g].end());
        put_u32(out, static_cast<uint32_t>(aux_chunks[g].size()));
        out.insert(out.end(), aux_chunks[g].begin(), aux_chunks[g].end());
        put_u32(out, static_cast<uint32_t>(audio_chunks[g].size()));
        out.insert(out.end(), audio_chunks[g].begin(), audio_chunks[g].end());
    }
    return out;
}

DemuxResult demux(const std::vector<uint8_t>& bytes) {
    Cursor cur{bytes.data(), bytes.size()};
    cur.need(4, "magic");
    if (std::memcmp(cur.p, "AVTH", 4) != 0) throw FormatError("bad magic (expected AVTH)");
    cur.p += 4;
    cur.left -= 4;
    uint8_t version = cur.u8("version");
    if (version != kContainerVersion)
        throw FormatError("version mismatch: got " + std::to_string(version) + ", expected " +
                          std::to_string(kContainerVersion));

    DemuxResult res;
    res.meta.width = cur.u16("width");
    res.meta.height = cur.u16("height");
    res.meta.fps_num = cur.u16("fps_num");
    res.meta.fps_den = cur.u16("fps_den");
    res.meta.total_frames = cur.u32("total_frames");
    res.meta.gop_size = cur.u16("gop_size");
    res.meta.keyframe_qp = cur.u8("keyframe_qp");
    res.meta.aux_qp = cur.u8("aux_qp");
    res.meta.downsample_factor = cur.u8("downsample_factor");
    res.meta.audio_rate = cur.u32("audio_rate");
    res.meta.audio_codec = cur.u8("audio_codec");
    uint32_t gop_count = cur.u32("gop_count");

    if (gop_count != expected_gop_count(res.meta.total_frames, res.meta.gop_size))
        throw FormatError("gop_count does not match total_frames/gop_size");
    if (res.meta.total_frames > 0) {
        res.plan = partition(res.meta.total_frames, res.meta.gop_size);
    } else {
        res.plan.gop_size = res.meta.gop_size;
    }

    for (uint32_t g = 0; g < gop_count; ++g) {
        GopPayload payload;
        auto read_blob = [&](const char* what) {
            std::string label = std::string(what) + " of GOP " + std::to_string(g);
            uint32_t len = cur.u32(label.c_str());
            if (cur.left < len)
                throw FormatError("length overrun in " + label + " (need " +
                                  std::to_string(len) + " bytes, have " +
                                  std::to_string(cur.left) + ")");
            std::vector<uint8_t> blob(cur.p, cur.p + len);
            cur.p += len;
            cur.left -= len;
            return blob;
        };
        payload.key = read_blob("key chunk");
        payload.aux = read_blob("aux chunk");
        payload.audio = read_blob("audio chunk");
        res.gops.push_back(std::move(payload));
    }
    if (cur.left != 0) throw FormatError("trailing bytes after the final GOP");
    return res;
}

std::vector<uint8_t> pack_chunk_list(const std::vector<CodedChunk>& chunks) {
    std::vector<uint8_t> out;
    put_u32(out, static_cast<uint32_t>(chunks.size()));
    for (const CodedChunk& c : chunks) {
        std::vector<uint8_t> bytes = c.serialize();
        put_u32(out, static_cast<uint32_t>(bytes.size()));
        out.insert(out.end(), bytes.begin(), bytes.end());
    }
    return out;
}

std::vector<CodedChunk> unpack_chunk_list(const std::vector<uint8_t>& blob) {
    Cursor cur{blob.data(), blob.size()};
    uint32_t count = cur.u32("chunk count");
    std::vector<CodedChunk> chunks;
    chunks.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = cur.u32("chunk length");
        cur.need(len, "chunk body");
        chunks.push_back(CodedChunk::parse(cur.p, len));
        cur.p += len;
        cur.left -= len;
    }
    if (cur.left != 0) throw FormatError("trailing bytes after chunk list");
    return chunks;
}

double kbps(uint64_t total_bytes, uint32_t total_frames, Rational fps) {
    if (total_frames == 0) throw ConfigError("kbps needs at least one frame");
    double duration = static_cast<double>(total_frames) / fps.value();
    return 8.0 * static_cast<double>(total_bytes) / (1000.0 * duration);
}

}  // namespace avth
