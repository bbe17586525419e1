#pragma once

#include <vector>

#include "avth/frame.hpp"
#include "avth/nets.hpp"
#include "avth/tensor.hpp"

namespace avth {

// 80-bin log-mel frames at 100 frames per second.
struct MelSpectrogram {
    nn::Tensor frames;  // [T,80]
    static constexpr int kBins = 80;
    static constexpr int kRate = 100;
    int count() const { return frames.shape.empty() ? 0 : frames.shape[0]; }
};

// Encoded audio features a[t x d] at 50 rows per second, so row 2i lines up
// with video frame i at 25 fps.
struct AudioFeatureSequence {
    nn::Tensor features;  // [T,d]
    static constexpr int kRate = 50;
    int count() const { return features.shape.empty() ? 0 : features.shape[0]; }
    int dim() const { return features.shape.size() == 2 ? features.shape[1] : 0; }
};

// The ten feature rows {2i-4 .. 2i+5} conditioning video frame i.
struct AudioWindow {
    nn::Tensor features;  // [10,d]
};

struct LatentFeature {
    nn::Tensor data;  // [L,h,w]
};

// Kaiser-windowed sinc resampling (beta 8, 32 taps per side), output length
// round(len * target / rate). A clip already at the target rate passes
// through bit-exactly.
AudioClip resample_audio(const AudioClip& clip, int target_rate);

// STFT 400/160 with a periodic Hann window and reflect center padding; power
// spectrum through 80 triangular HTK-mel filters on 0..8000 Hz; ln(x+1e-10).
MelSpectrogram log_mel(const AudioClip& clip16k);

// Triangle peak frequencies of the 80 mel filters, in Hz.
std::vector<double> mel_filter_centers_hz();

// Per-frame 80->d projection then stride-2 temporal averaging: 100/s -> 50/s.
AudioFeatureSequence audio_encode(const MelSpectrogram& mel, const AudioProjection& net);

// Rows 2i-4 .. 2i+5, indices replicate-clamped into [0, t).
AudioWindow window_for_frame(const AudioFeatureSequence& seq, int frame_index);

// The raw index list before clamping is exactly {2i-4, ..., 2i+5}.
std::vector<long> window_indices_unclamped(long frame_index);

// Zero the lower half (ceil(h/2) rows when odd) of every plane.
Frame mask_lower_half(const Frame& frame);

LatentFeature vae_encode(const Frame& frame, const VaeEncoderNet& net);
Frame vae_decode(const LatentFeature& latent, const VaeDecoderNet& net);

LatentFeature unet_fuse(const LatentFeature& v_ref, const LatentFeature& v_mask,
                        const AudioWindow& audio, const UNetFuseNet& net,
                        nn::Tensor* attention_out = nullptr);

// Mouth crop used by the sync scorer: lower half rows, middle half columns.
void mouth_crop_rect(int w, int h, int& x0, int& y0, int& cw, int& ch);

// Stage-II pass over TR frames. frame_index_offset shifts the audio window
// index of tr_frames[j] to j + offset (the caller's frame numbering).
FrameSequence stage2_reconstruct(const FrameSequence& tr_frames, const AudioClip& clip,
                                 const Stage2Nets& nets, const NetConfig& cfg,
                                 int frame_index_offset = 0);

}  // namespace avth
