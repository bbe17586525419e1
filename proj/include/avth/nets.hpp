#pragma once

#include <cstdint>
#include <vector>

#include "avth/frame.hpp"
#include "avth/tensor.hpp"
#include "avth/util.hpp"

namespace avth {

// Shared dimensions for the toy networks. Every parameter tensor is a pure
// function of (seed, these fields), so equal configs give byte-identical nets.
struct NetConfig {
    int frame_w = 512;
    int frame_h = 512;
    int feat_c = 4;    // appearance volume channels
    int feat_d = 4;    // appearance volume depth
    int feat_hw = 16;  // appearance volume spatial size (from frame_w)
    int latent_ch = 8;
    int audio_dim = 16;
    int attn_dim = 16;
    int keypoints = 21;
    double sigma = 0.3;
    double mouth_alpha = 1.0;
    uint64_t seed = 1234;

    // Number of 2x stages between frame and appearance grid; validates that
    // the frame divides down to feat_hw exactly.
    int appearance_stages() const;
    int feat_grid_h() const { return frame_h >> appearance_stages(); }
    int feat_grid_w() const { return frame_w >> appearance_stages(); }
    int latent_h() const { return frame_h / 8; }
    int latent_w() const { return frame_w / 8; }
    void validate() const;
};

namespace nn {

struct Conv2dLayer {
    Var w, b;
    int stride = 1, pad = 0;
    Var fwd(Var x) const { return conv2d(x, w, b, stride, pad); }
};

struct ConvT2dLayer {
    Var w, b;
    int stride = 1, pad = 0;
    Var fwd(Var x) const { return conv_transpose2d(x, w, b, stride, pad); }
};

struct LinearLayer {
    Var w, b;  // w[in,out], b[out]
    Var fwd(Var x) const { return add_rowvec(matmul(x, w), b); }
};

}  // namespace nn

nn::Tensor frame_to_tensor01(const Frame& rgb);          // [3,H,W] in [0,1]
Frame tensor01_to_frame(const nn::Tensor& t);            // rounds and clamps

// Bicubic size adjustment plus a small seeded residual enhancement.
struct FacialSrNet {
    nn::Conv2dLayer c1, c2;
    static FacialSrNet make(uint64_t seed);
    std::vector<nn::Var> params();
};

// Keyframe -> 3D appearance volume [C,D,h,w].
struct AppearanceNet {
    nn::Conv2dLayer c1, c2;
    int feat_c = 4, feat_d = 4;
    static AppearanceNet make(const NetConfig& cfg);
    nn::Var fwd(nn::Var x01) const;  // [3,H,W] -> [C,D,h,w]
    std::vector<nn::Var> params();
};

// Frame -> (pitch, yaw, roll, log-scale, expression, translation) head.
struct MotionNet {
    nn::Conv2dLayer c1, c2;
    nn::LinearLayer f1, f2;
    int keypoints = 21;
    static MotionNet make(const NetConfig& cfg);
    nn::Tensor raw_outputs(const Frame& rgb) const;  // [7 + 3K]
    std::vector<nn::Var> params();
};

// Appearance volume -> frame, sigmoid-bounded.
struct GeneratorNet {
    nn::ConvT2dLayer t1, t2;
    nn::Conv2dLayer out;
    // Degenerate 2^0 stages fall back to stride-1 3x3 convolutions.
    bool t1_is_conv = false;
    bool t2_is_conv = false;
    static GeneratorNet make(const NetConfig& cfg);
    nn::Var fwd(nn::Var volume) const;  // [C,D,h,w] -> [3,H,W] in (0,1)
    std::vector<nn::Var> params();
};

struct VaeEncoderNet {
    nn::Conv2dLayer down, ra, rb;
    static VaeEncoderNet make(const NetConfig& cfg, bool near_identity);
    nn::Var fwd(nn::Var x01) const;  // [3,H,W] -> [L,H/8,W/8]
    std::vector<nn::Var> params();
};

struct VaeDecoderNet {
    nn::ConvT2dLayer up;
    nn::Conv2dLayer ra, rb, out;
    static VaeDecoderNet make(const NetConfig& cfg, bool near_identity);
    nn::Var fwd(nn::Var latent) const;  // [L,h,w] -> [3,H,W] in (0,1)
    std::vector<nn::Var> params();
};

// Channel-concatenated latents refined by a tiny encoder/decoder with one
// audio cross-attention block; returns v_ref + residual.
struct UNetFuseNet {
    nn::Conv2dLayer e1, e2, out;
    nn::ConvT2dLayer d1;
    nn::Var wq, wk, wv, wo;
    nn::Var pos;  // fixed sinusoidal [10, audio_dim]
    int attn_dim = 16;
    static UNetFuseNet make(const NetConfig& cfg, bool near_identity);
    // attn_out, when given, receives the [tokens, 10] attention weights.
    nn::Var fwd(nn::Var v_ref, nn::Var v_mask, nn::Var audio_window,
                nn::Tensor* attn_out = nullptr) const;
    std::vector<nn::Var> params();
};

// 80 -> d per-mel-frame projection (the audio encoder's learnable part).
struct AudioProjection {
    nn::LinearLayer proj;
    static AudioProjection make(const NetConfig& cfg);
    std::vector<nn::Var> params();
};

// Frozen conv pyramid standing in for a perceptual feature extractor.
struct PerceptualNet {
    nn::Conv2dLayer c1, c2, c3, c4;
    static PerceptualNet make(uint64_t seed);
    nn::Var fwd(nn::Var x01) const;  // [3,H,W] -> flat features
    std::vector<nn::Var> params();
};

// Paired audio-window and mouth-crop embedders emitting unit vectors.
struct SyncScorer {
    nn::LinearLayer a1, a2, m1, m2;
    int audio_dim = 16;
    int embed_dim = 32;
    static SyncScorer make(const NetConfig& cfg);
    nn::Var embed_audio(nn::Var window) const;   // [10,d] -> [e]
    nn::Var embed_mouth(nn::Var crop01) const;   // [3,h,w] -> [e]
    std::vector<nn::Var> params();
};

struct Stage1Nets {
    FacialSrNet sr;
    AppearanceNet app;
    MotionNet mot;
    GeneratorNet gen;
    static Stage1Nets make(const NetConfig& cfg);
};

struct Stage2Nets {
    VaeEncoderNet enc;
    VaeDecoderNet dec;
    UNetFuseNet unet;
    AudioProjection aproj;
    // Near-identity initialization: the decoder approximately inverts the
    // encoder and the UNet residual starts small, so an untrained pipeline
    // already reproduces its input closely.
    static Stage2Nets make(const NetConfig& cfg);
    static Stage2Nets make_random(const NetConfig& cfg);
    std::vector<nn::Var> trainable_params();  // enc + dec + unet
};

}  // namespace avth
