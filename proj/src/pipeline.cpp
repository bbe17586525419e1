#include "avth/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "avth/animator.hpp"
#include "avth/basecodec.hpp"
#include "avth/container.hpp"
#include "avth/error.hpp"
#include "avth/gop.hpp"
#include "avth/lipsync.hpp"
#include "avth/media_io.hpp"
#include "avth/parallel.hpp"
#include "avth/util.hpp"

namespace avth {

namespace {

// Sample span [begin, end) of the frame range; the final GOP absorbs any
// trailing audio.
std::pair<size_t, size_t> audio_span(const AudioClip& audio, uint32_t frame_begin,
                                     uint32_t frame_end, Rational fps, bool last_gop) {
    double rate = audio.sample_rate;
    size_t b = static_cast<size_t>(iround(frame_begin * rate / fps.value()));
    size_t e = last_gop ? audio.samples.size()
                        : static_cast<size_t>(iround(frame_end * rate / fps.value()));
    b = std::min(b, audio.samples.size());
    e = std::min(std::max(e, b), audio.samples.size());
    return {b, e};
}

std::vector<uint8_t> pcm_bytes(const AudioClip& audio, size_t b, size_t e) {
    std::vector<uint8_t> out;
    out.reserve((e - b) * 2);
    for (size_t i = b; i < e; ++i) {
        uint16_t v = static_cast<uint16_t>(audio.samples[i]);
        out.push_back(static_cast<uint8_t>(v & 0xff));
        out.push_back(static_cast<uint8_t>(v >> 8));
    }
    return out;
}

}  // namespace

std::vector<uint8_t> encode_stream(const FrameSequence& video, const AudioClip& audio,
                                   const Config& cfg, EncodeSummary* summary) {
    cfg.validate();
    video.validate();
    if (video.frames.empty()) throw ShapeError("cannot encode an empty sequence");
    if (video.frames[0].color != ColorTag::YCbCr420)
        throw ShapeError("encoder expects 4:2:0 frames");
    if (!cfg.extern_encode.empty() || !cfg.extern_decode.empty())
        throw ConfigError(
            "external codec templates are not carried by the AVTH container; "
            "use the external_encode/external_decode library hooks directly");

    const Frame& first = video.frames[0];
    GopPlan plan = partition(static_cast<uint32_t>(video.size()), cfg.gop_size);

    std::vector<std::vector<uint8_t>> key_blobs, aux_blobs, audio_blobs;
    uint64_t audio_bytes = 0;
    for (size_t g = 0; g < plan.groups.size(); ++g) {
        const GopGroup& group = plan.groups[g];
        key_blobs.push_back(
            encode_intra(video.frames[group.keyframe_index], cfg.keyframe_qp).serialize());

        FrameSequence aux;
        aux.fps = video.fps;
        for (uint32_t t : group.target_indices)
            aux.frames.push_back(downsample(video.frames[t], cfg.downsample_factor));
        std::vector<CodedChunk> chunks;
        if (!aux.frames.empty()) chunks = encode_lowdelay(aux, cfg.aux_qp);
        aux_blobs.push_back(pack_chunk_list(chunks));

        uint32_t frame_end = group.target_indices.empty() ? group.keyframe_index + 1
                                                          : group.target_indices.back() + 1;
        auto [b, e] = audio_span(audio, group.keyframe_index, frame_end, video.fps,
                                 g + 1 == plan.groups.size());
        audio_blobs.push_back(pcm_bytes(audio, b, e));
        audio_bytes += audio_blobs.back().size();
    }

    ContainerMeta meta;
    meta.width = static_cast<uint16_t>(first.width);
    meta.height = static_cast<uint16_t>(first.height);
    meta.fps_num = static_cast<uint16_t>(video.fps.num);
    meta.fps_den = static_cast<uint16_t>(video.fps.den);
    meta.total_frames = static_cast<uint32_t>(video.size());
    meta.gop_size = static_cast<uint16_t>(cfg.gop_size);
    meta.keyframe_qp = static_cast<uint8_t>(cfg.keyframe_qp);
    meta.aux_qp = static_cast<uint8_t>(cfg.aux_qp);
    meta.downsample_factor = static_cast<uint8_t>(cfg.downsample_factor);
    meta.audio_rate = static_cast<uint32_t>(std::max(0, audio.sample_rate));
    meta.audio_codec = 0;

    std::vector<uint8_t> bytes = mux(plan, key_blobs, aux_blobs, audio_blobs, meta);
    if (summary) {
        summary->total_bytes = bytes.size();
        summary->audio_payload_bytes = audio_bytes;
        summary->gop_count = static_cast<uint32_t>(plan.groups.size());
        summary->total_kbps = kbps(bytes.size(), meta.total_frames, video.fps);
        summary->video_kbps = kbps(bytes.size() - audio_bytes, meta.total_frames, video.fps);
    }
    return bytes;
}

DecodeResult decode_stream(const std::vector<uint8_t>& bytes, const Config& cfg, bool want_tr,
                           const std::string& motion_dump_dir) {
    DemuxResult d = demux(bytes);
    const ContainerMeta& meta = d.meta;
    if (meta.total_frames == 0) {
        DecodeResult empty;
        empty.video.fps = {meta.fps_num, meta.fps_den};
        empty.audio.sample_rate = static_cast<int>(meta.audio_rate);
        return empty;
    }
    if (meta.audio_codec != 0)
        throw FormatError("external audio codec payloads need external tooling to decode");

    Rational fps{meta.fps_num, meta.fps_den};
    DecodeResult res;
    res.video.fps = fps;
    res.video.frames.resize(meta.total_frames);
    res.tr_frames.fps = fps;
    res.audio.sample_rate = static_cast<int>(meta.audio_rate);
    for (const GopPayload& g : d.gops)
        for (size_t i = 0; i + 1 < g.audio.size(); i += 2)
            res.audio.samples.push_back(
                static_cast<int16_t>(g.audio[i] | (g.audio[i + 1] << 8)));

    Config effective = cfg;
    effective.gop_size = meta.gop_size;
    effective.keyframe_qp = meta.keyframe_qp;
    effective.aux_qp = meta.aux_qp;
    effective.downsample_factor = meta.downsample_factor;
    NetConfig nc = effective.net_config(meta.width, meta.height);
    Stage1Nets s1 = Stage1Nets::make(nc);
    Stage2Nets s2 = Stage2Nets::make(nc);

    bool have_audio = !res.audio.samples.empty() && res.audio.sample_rate > 0;
    AudioFeatureSequence feats;
    if (have_audio) {
        AudioClip a16 = resample_audio(res.audio, 16000);
        if (static_cast<long>(a16.samples.size()) >= 160)
            feats = audio_encode(log_mel(a16), s2.aproj);
    }
    bool have_feats = feats.count() > 0;

    for (size_t g = 0; g < d.gops.size(); ++g) {
        const GopGroup& group = d.plan.groups[g];
        Frame key = decode_intra(CodedChunk::parse(d.gops[g].key));
        res.video.frames[group.keyframe_index] = key;
        if (group.target_indices.empty()) continue;

        std::vector<CodedChunk> chunks = unpack_chunk_list(d.gops[g].aux);
        if (chunks.size() != group.target_indices.size())
            throw FormatError("aux chunk count does not match GOP targets in GOP " +
                              std::to_string(g));
        FrameSequence low = decode_lowdelay(chunks, fps);

        FrameSequence aux_sr;
        aux_sr.fps = fps;
        aux_sr.frames.resize(low.size());
        parallel_for(low.size(), [&](size_t i) {
            aux_sr.frames[i] = facial_sr(low.frames[i], meta.width, meta.height, s1.sr);
        });

        Stage1Debug debug;
        FrameSequence tr = stage1_reconstruct(key, aux_sr, s1, nc,
                                              motion_dump_dir.empty() ? nullptr : &debug);
        if (!motion_dump_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "motion_gop%04zu.f32", g);
            std::vector<const KeypointSet*> sets{&debug.x_key};
            for (const KeypointSet& s : debug.x_trg) sets.push_back(&s);
            write_f32_sidecar(motion_dump_dir + "/" + name, sets);
        }

        FrameSequence finals;
        if (have_feats) {
            finals.fps = fps;
            finals.frames.resize(tr.size());
            parallel_for(tr.size(), [&](size_t j) {
                const Frame& frame = tr.frames[j];
                LatentFeature v_ref = vae_encode(frame, s2.enc);
                LatentFeature v_mask = vae_encode(mask_lower_half(frame), s2.enc);
                AudioWindow win = window_for_frame(
                    feats, static_cast<int>(group.target_indices[j]));
                LatentFeature fused = unet_fuse(v_ref, v_mask, win, s2.unet);
                finals.frames[j] = vae_decode(fused, s2.dec);
            });
        } else {
            finals = tr;  // no audio carried: Stage-I output is final
        }

        for (size_t j = 0; j < finals.size(); ++j)
            res.video.frames[group.target_indices[j]] = rgb_to_yuv(finals.frames[j]);
        if (want_tr)
            for (Frame& f : tr.frames) res.tr_frames.frames.push_back(std::move(f));
    }
    return res;
}

}  // namespace avth
