#include "avth/nets.hpp"

#include <cmath>
#include <string>

#include "avth/error.hpp"

namespace avth {

using nn::Tensor;
using nn::Var;

int NetConfig::appearance_stages() const {
    int m = 0;
    int w = frame_w;
    while (w > feat_hw && w % 2 == 0) {
        w /= 2;
        ++m;
    }
    if (w != feat_hw)
        throw ConfigError("frame width " + std::to_string(frame_w) +
                          " is not feat_hw * 2^k (feat_hw=" + std::to_string(feat_hw) + ")");
    if ((frame_h >> m) << m != frame_h)
        throw ConfigError("frame height does not divide down by the appearance stages");
    return m;
}

void NetConfig::validate() const {
    if (frame_w <= 0 || frame_h <= 0) throw ConfigError("frame dims must be positive");
    if (frame_w % 8 || frame_h % 8) throw ConfigError("frame dims must be multiples of 8");
    if (feat_c < 1 || feat_d < 1 || feat_hw < 1) throw ConfigError("bad feature volume dims");
    if (latent_ch < 3) throw ConfigError("latent channels must be >= 3");
    if (audio_dim < 1 || attn_dim < 1) throw ConfigError("bad audio/attention dims");
    if (keypoints < 1) throw ConfigError("keypoint count must be >= 1");
    if (!(sigma > 0)) throw ConfigError("warp sigma must be positive");
    if (mouth_alpha < 0 || mouth_alpha > 1) throw ConfigError("mouth_alpha must be in [0,1]");
    appearance_stages();
}

// ---------------------------------------------------------------------------
// Frame <-> tensor

Tensor frame_to_tensor01(const Frame& rgb) {
    if (rgb.color != ColorTag::Rgb) throw ShapeError("frame_to_tensor01 expects RGB");
    Tensor t({3, rgb.height, rgb.width});
    size_t n = static_cast<size_t>(rgb.width) * rgb.height;
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < n; ++i) t[c * n + i] = rgb.planes[c][i] / 255.0;
    return t;
}

Frame tensor01_to_frame(const Tensor& t) {
    if (t.shape.size() != 3 || t.shape[0] != 3) throw ShapeError("expected a [3,H,W] tensor");
    Frame f = Frame::make(t.shape[2], t.shape[1], ColorTag::Rgb);
    size_t n = static_cast<size_t>(f.width) * f.height;
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < n; ++i) f.planes[c][i] = clamp_u8(t[c * n + i] * 255.0);
    return f;
}

// ---------------------------------------------------------------------------
// Initialization helpers

namespace {

Var param_normal(Rng& rng, std::vector<int> shape, double std_dev) {
    Tensor t(shape);
    for (double& v : t.v) v = rng.normal(0.0, std_dev);
    return nn::leaf(std::move(t));
}

Var param_zero(std::vector<int> shape) { return nn::leaf(Tensor(std::move(shape))); }

double fan_in_conv(const std::vector<int>& wshape) {
    return static_cast<double>(wshape[1]) * wshape[2] * wshape[3];
}

// Conv weight [Co,Ci,k,k], N(0, gain/sqrt(fan_in)).
Var conv_w(Rng& rng, int co, int ci, int k, double gain) {
    std::vector<int> shape{co, ci, k, k};
    return param_normal(rng, shape, gain / std::sqrt(fan_in_conv(shape)));
}

// ConvT weight [Ci,Co,k,k].
Var convt_w(Rng& rng, int ci, int co, int k, double gain) {
    std::vector<int> shape{ci, co, k, k};
    return param_normal(rng, shape, gain / std::sqrt(static_cast<double>(ci) * k * k));
}

Var linear_w(Rng& rng, int in, int out, double gain) {
    return param_normal(rng, {in, out}, gain / std::sqrt(static_cast<double>(in)));
}

// Overwrites the [co][co] kernel of a conv weight with a box filter, making
// the first `ch` output channels average their matching input channel.
void set_box_channels(Var w, int ch, double scale) {
    int ci = w->val.shape[1], kh = w->val.shape[2], kw = w->val.shape[3];
    for (int c = 0; c < ch; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
                w->val[((static_cast<size_t>(c) * ci + c) * kh + ky) * kw + kx] =
                    scale / (kh * kw);
}

// ConvT tent (bilinear) kernel on the matching channels: kernel 2s, pad s/2.
void set_tent_channels(Var w, int ch, int stride, double scale) {
    int co = w->val.shape[1], k = w->val.shape[2];
    for (int c = 0; c < ch; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                double ty = 1.0 - std::abs(ky + 0.5 - k / 2.0) / stride;
                double tx = 1.0 - std::abs(kx + 0.5 - k / 2.0) / stride;
                w->val[((static_cast<size_t>(c) * co + c) * k + ky) * k + kx] =
                    scale * std::max(0.0, ty) * std::max(0.0, tx);
            }
}

// Center-tap passthrough on the matching channels of a k3 conv.
void set_center_channels(Var w, int ch, double scale) {
    int ci = w->val.shape[1], kh = w->val.shape[2], kw = w->val.shape[3];
    for (int c = 0; c < ch; ++c)
        w->val[((static_cast<size_t>(c) * ci + c) * kh + kh / 2) * kw + kw / 2] = scale;
}

// Splits 2^m into the two stage strides used by the appearance/generator
// pyramids.
void split_stages(int m, int& s1, int& s2) {
    s1 = 1 << ((m + 1) / 2);
    s2 = 1 << (m / 2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Facial SR

FacialSrNet FacialSrNet::make(uint64_t seed) {
    Rng rng(seed ^ 0x5f5f5f01ull);
    FacialSrNet net;
    net.c1 = {conv_w(rng, 8, 3, 3, 0.4), param_zero({8}), 1, 1};
    net.c2 = {conv_w(rng, 3, 8, 3, 0.05), param_zero({3}), 1, 1};
    return net;
}

std::vector<Var> FacialSrNet::params() { return {c1.w, c1.b, c2.w, c2.b}; }

// ---------------------------------------------------------------------------
// Appearance extractor

AppearanceNet AppearanceNet::make(const NetConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x5f5f5f02ull);
    int s1, s2;
    split_stages(cfg.appearance_stages(), s1, s2);
    int cd = cfg.feat_c * cfg.feat_d;
    AppearanceNet net;
    net.feat_c = cfg.feat_c;
    net.feat_d = cfg.feat_d;
    net.c1 = {conv_w(rng, 8, 3, s1, 0.3), param_zero({8}), s1, 0};
    net.c2 = {conv_w(rng, cd, 8, s2, 0.3), param_zero({cd}), s2, 0};
    // First three channels track a downsampled, zero-centered copy of the
    // image (the input is already shifted by -0.5) so the default generator
    // has recognizable content to animate. The 0.5/2.0 split keeps the
    // intermediate inside tanh's near-linear range.
    set_box_channels(net.c1.w, 3, 0.5);
    set_box_channels(net.c2.w, 3, 2.0);
    return net;
}

Var AppearanceNet::fwd(Var x01) const {
    Var x = nn::add_scalar(x01, -0.5);
    Var h = nn::tanh_(c1.fwd(x));
    Var f = c2.fwd(h);
    int hh = f->val.shape[1], ww = f->val.shape[2];
    return nn::reshape(f, {feat_c, feat_d, hh, ww});
}

std::vector<Var> AppearanceNet::params() { return {c1.w, c1.b, c2.w, c2.b}; }

// ---------------------------------------------------------------------------
// Motion extractor

MotionNet MotionNet::make(const NetConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x5f5f5f03ull);
    MotionNet net;
    net.keypoints = cfg.keypoints;
    net.c1 = {conv_w(rng, 8, 3, 8, 1.2), param_normal(rng, {8}, 0.1), 8, 0};
    net.c2 = {conv_w(rng, 8, 8, 4, 1.2), param_normal(rng, {8}, 0.1), 4, 0};
    int out = 7 + 3 * cfg.keypoints;
    net.f1 = {linear_w(rng, 8, 32, 1.5), param_normal(rng, {32}, 0.1)};
    net.f2 = {linear_w(rng, 32, out, 1.5), param_zero({out})};
    return net;
}

Tensor MotionNet::raw_outputs(const Frame& rgb) const {
    Var x = nn::constant(frame_to_tensor01(rgb));
    x = nn::add_scalar(x, -0.5);
    Var h = nn::tanh_(c1.fwd(x));
    h = nn::tanh_(c2.fwd(h));
    Var pooled = nn::global_avgpool(h);
    Var o = f2.fwd(nn::tanh_(f1.fwd(pooled)));
    return o->val;
}

std::vector<Var> MotionNet::params() {
    return {c1.w, c1.b, c2.w, c2.b, f1.w, f1.b, f2.w, f2.b};
}

// ---------------------------------------------------------------------------
// Generator

namespace {

// Builds one upsampling stage: a tent-initialized transposed conv for
// stride >= 2, a center-tap 3x3 conv when the stage is degenerate.
nn::ConvT2dLayer make_up_stage(Rng& rng, int cin, int cout, int stride, bool& is_conv) {
    if (stride > 1) {
        is_conv = false;
        nn::ConvT2dLayer layer{convt_w(rng, cin, cout, 2 * stride, 0.05), param_zero({cout}),
                               stride, stride / 2};
        set_tent_channels(layer.w, 3, stride, 1.0);
        return layer;
    }
    is_conv = true;
    Var w = conv_w(rng, cout, cin, 3, 0.05);
    set_center_channels(w, 3, 1.0);
    return {w, param_zero({cout}), 1, 1};
}

}  // namespace

GeneratorNet GeneratorNet::make(const NetConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x5f5f5f04ull);
    int s1, s2;
    split_stages(cfg.appearance_stages(), s1, s2);
    int cd = cfg.feat_c * cfg.feat_d;
    GeneratorNet net;
    // Upsample by s2 then s1 (mirrors the extractor), tent kernels on the
    // image-carrying channels.
    net.t1 = make_up_stage(rng, cd, 8, s2, net.t1_is_conv);
    net.t2 = make_up_stage(rng, 8, 8, s1, net.t2_is_conv);
    net.out = {conv_w(rng, 3, 8, 3, 0.05), param_zero({3}), 1, 1};
    // Gain that undoes the two tanh squashes mid-range before the sigmoid.
    set_center_channels(net.out.w, 3, 4.6);
    return net;
}

Var GeneratorNet::fwd(Var volume) const {
    const auto& s = volume->val.shape;
    if (s.size() != 4) throw ShapeError("generator expects a [C,D,h,w] volume");
    Var x = nn::reshape(volume, {s[0] * s[1], s[2], s[3]});
    Var h = t1_is_conv ? nn::conv2d(x, t1.w, t1.b, 1, 1)
                       : nn::conv_transpose2d(x, t1.w, t1.b, t1.stride, t1.pad);
    h = nn::tanh_(h);
    Var h2 = t2_is_conv ? nn::conv2d(h, t2.w, t2.b, 1, 1)
                        : nn::conv_transpose2d(h, t2.w, t2.b, t2.stride, t2.pad);
    h2 = nn::tanh_(h2);
    return nn::sigmoid_(out.fwd(h2));
}

std::vector<Var> GeneratorNet::params() { return {t1.w, t1.b, t2.w, t2.b, out.w, out.b}; }

// ---------------------------------------------------------------------------
// VAE

VaeEncoderNet VaeEncoderNet::make(const NetConfig& cfg, bool near_identity) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x5f5f5f05ull);
    int l = cfg.latent_ch;
    VaeEncoderNet net;
    net.down = {conv_w(rng, l, 3, 8, 0.3), param_zero({l}), 8, 0};
    net.ra = {conv_w(rng, l, l, 3, 0.5), param_zero({l}), 1, 1};
    net.rb = {conv_w(rng, l, l, 3, near_identity ? 0.0 : 0.1), param_zero({l}), 1, 1};
    if (near_identity) set_box_channels(net.down.w, 3, 1.0);
    return net;
}

Var VaeEncoderNet::fwd(Var x01) const {
    Var x = nn::add_scalar(x01, -0.5);
    Var h = down.fwd(x);
    Var r = rb.fwd(nn::tanh_(ra.fwd(h)));
    return nn::add(h, r);
}

std::vector<Var> VaeEncoderNet::params() {
    return {down.w, down.b, ra.w, ra.b, rb.w, rb.b};
}

VaeDecoderNet VaeDecoderNet::make(const NetConfig& cfg, bool near_identity) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x5f5f5f06ull);
    int l = cfg.latent_ch;
    VaeDecoderNet net;
    net.up = {convt_w(rng, l, l, 16, 0.1), param_zero({l}), 8, 4};
    net.ra = {conv_w(rng, l, l, 3, 0.5), param_zero({l}), 1, 1};
    net.rb = {conv_w(rng, l, l, 3, near_identity ? 0.0 : 0.1), param_zero({l}), 1, 1};
    net.out = {conv_w(rng, 3, l, 3, near_identity ? 0.02 : 0.3), param_zero({3}), 1, 1};
    if (near_identity) {
        set_tent_channels(net.up.w, 3, 8, 1.0);
        set_center_channels(net.out.w, 3, 4.0);
    }
    return net;
}

Var VaeDecoderNet::fwd(Var latent) const {
    Var u = up.fwd(latent);
    Var r = rb.fwd(nn::tanh_(ra.fwd(u)));
    u = nn::add(u, r);
    return nn::sigmoid_(out.fwd(u));
}

std::vector<Var> VaeDecoderNet::params() {
    return {up.w, up.b, ra.w, ra.b, rb.w, rb.b, out.w, out.b};
}

// ---------------------------------------------------------------------------
// UNet with audio cross-attention

namespace {

Tensor sinusoidal_positions(int rows, int dim) {
    Tensor t({rows, dim});
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < dim; ++j) {
            double freq = std::pow(10000.0, -static_cast<double>(j / 2 * 2) / dim);
            t[static_cast<size_t>(r) * dim + j] =
                (j % 2 == 0) ? std::sin(r * freq) : std::cos(r * freq);
        }
    return t;
}

}  // namespace

UNetFuseNet UNetFuseNet::make(const NetConfig& cfg, bool near_identity) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x5f5f5f07ull);
    int l = cfg.latent_ch, a = cfg.attn_dim, d = cfg.audio_dim;
    UNetFuseNet net;
    net.attn_dim = a;
    net.e1 = {conv_w(rng, 16, 2 * l, 3, 0.5), param_zero({16}), 1, 1};
    net.e2 = {conv_w(rng, 16, 16, 3, 0.5), param_zero({16}), 2, 1};
    net.wq = linear_w(rng, 16, a, 1.0);
    net.wk = linear_w(rng, d, a, 1.0);
    net.wv = linear_w(rng, d, a, 1.0);
    net.wo = linear_w(rng, a, 16, 0.3);
    net.d1 = {convt_w(rng, 16, 16, 4, 0.5), param_zero({16}), 2, 1};
    net.out = {conv_w(rng, l, 16, 3, near_identity ? 0.02 : 0.2), param_zero({l}), 1, 1};
    net.pos = nn::constant(sinusoidal_positions(10, d));
    return net;
}

Var UNetFuseNet::fwd(Var v_ref, Var v_mask, Var audio_window, Tensor* attn_out) const {
    if (v_ref->val.shape != v_mask->val.shape)
        throw ShapeError("unet_fuse: latents must share dims");
    if (audio_window->val.shape.size() != 2 || audio_window->val.shape[0] != 10)
        throw ShapeError("unet_fuse: audio window must be [10,d]");
    Var x = nn::concat_ch(v_ref, v_mask);
    Var h1 = nn::tanh_(e1.fwd(x));
    Var h2 = nn::tanh_(e2.fwd(h1));

    int ch = h2->val.shape[0], hh = h2->val.shape[1], ww = h2->val.shape[2];
    Var tokens = nn::transpose2d(nn::reshape(h2, {ch, hh * ww}));  // [N,16]
    Var audio = nn::add(audio_window, pos);
    Var q = nn::matmul(tokens, wq);
    Var k = nn::matmul(audio, wk);
    Var v = nn::matmul(audio, wv);
    Var attn = nn::softmax_rows(nn::scale(nn::matmul_nt(q, k),
                                          1.0 / std::sqrt(static_cast<double>(attn_dim))));
    if (attn_out) *attn_out = attn->val;
    Var ctx = nn::matmul(attn, v);
    tokens = nn::add(tokens, nn::matmul(ctx, wo));
    Var h3 = nn::reshape(nn::transpose2d(tokens), {ch, hh, ww});

    Var u = nn::tanh_(d1.fwd(h3));
    return nn::add(v_ref, out.fwd(u));
}

std::vector<Var> UNetFuseNet::params() {
    return {e1.w, e1.b, e2.w, e2.b, wq, wk, wv, wo, d1.w, d1.b, out.w, out.b};
}

// ---------------------------------------------------------------------------
// Audio projection / perceptual / sync scorer

AudioProjection AudioProjection::make(const NetConfig& cfg) {
    Rng rng(cfg.seed ^ 0x5f5f5f08ull);
    AudioProjection net;
    net.proj = {linear_w(rng, 80, cfg.audio_dim, 0.7), param_zero({cfg.audio_dim})};
    return net;
}

std::vector<Var> AudioProjection::params() { return {proj.w, proj.b}; }

PerceptualNet PerceptualNet::make(uint64_t seed) {
    Rng rng(seed ^ 0x5f5f5f09ull);
    PerceptualNet net;
    net.c1 = {conv_w(rng, 8, 3, 3, 0.8), param_normal(rng, {8}, 0.05), 2, 1};
    net.c2 = {conv_w(rng, 8, 8, 3, 0.8), param_normal(rng, {8}, 0.05), 2, 1};
    net.c3 = {conv_w(rng, 8, 8, 3, 0.8), param_normal(rng, {8}, 0.05), 2, 1};
    net.c4 = {conv_w(rng, 8, 8, 3, 0.8), param_normal(rng, {8}, 0.05), 2, 1};
    return net;
}

Var PerceptualNet::fwd(Var x01) const {
    Var h = nn::tanh_(c1.fwd(nn::add_scalar(x01, -0.5)));
    h = nn::tanh_(c2.fwd(h));
    h = nn::tanh_(c3.fwd(h));
    h = c4.fwd(h);
    return nn::reshape(h, {1, static_cast<int>(h->val.size())});
}

std::vector<Var> PerceptualNet::params() {
    return {c1.w, c1.b, c2.w, c2.b, c3.w, c3.b, c4.w, c4.b};
}

SyncScorer SyncScorer::make(const NetConfig& cfg) {
    Rng rng(cfg.seed ^ 0x5f5f5f0aull);
    SyncScorer net;
    net.audio_dim = cfg.audio_dim;
    net.a1 = {linear_w(rng, 10 * cfg.audio_dim, 32, 1.0), param_normal(rng, {32}, 0.05)};
    net.a2 = {linear_w(rng, 32, net.embed_dim, 1.0), param_normal(rng, {net.embed_dim}, 0.05)};
    net.m1 = {linear_w(rng, 3 * 8 * 8, 32, 1.0), param_normal(rng, {32}, 0.05)};
    net.m2 = {linear_w(rng, 32, net.embed_dim, 1.0), param_normal(rng, {net.embed_dim}, 0.05)};
    return net;
}

Var SyncScorer::embed_audio(Var window) const {
    if (window->val.shape.size() != 2 || window->val.shape[0] != 10 ||
        window->val.shape[1] != audio_dim)
        throw ShapeError("sync scorer expects a [10,d] audio window");
    // Per-dimension mean removal makes the embedding invariant to uniform
    // log-domain shifts, i.e. to a global gain on the audio samples.
    Var z = nn::sub_colmean(window);
    z = nn::reshape(z, {1, 10 * audio_dim});
    Var h = nn::tanh_(a1.fwd(z));
    Var e = a2.fwd(h);
    return nn::l2_normalize(nn::reshape(e, {embed_dim}));
}

Var SyncScorer::embed_mouth(Var crop01) const {
    if (crop01->val.shape.size() != 3 || crop01->val.shape[0] != 3)
        throw ShapeError("sync scorer expects a [3,h,w] mouth crop");
    Var p = nn::adaptive_avgpool(crop01, 8, 8);
    Var z = nn::reshape(p, {1, 3 * 8 * 8});
    Var h = nn::tanh_(m1.fwd(z));
    Var e = m2.fwd(h);
    return nn::l2_normalize(nn::reshape(e, {embed_dim}));
}

std::vector<Var> SyncScorer::params() {
    return {a1.w, a1.b, a2.w, a2.b, m1.w, m1.b, m2.w, m2.b};
}

// ---------------------------------------------------------------------------
// Bundles

Stage1Nets Stage1Nets::make(const NetConfig& cfg) {
    return {FacialSrNet::make(cfg.seed), AppearanceNet::make(cfg), MotionNet::make(cfg),
            GeneratorNet::make(cfg)};
}

Stage2Nets Stage2Nets::make(const NetConfig& cfg) {
    return {VaeEncoderNet::make(cfg, true), VaeDecoderNet::make(cfg, true),
            UNetFuseNet::make(cfg, true), AudioProjection::make(cfg)};
}

Stage2Nets Stage2Nets::make_random(const NetConfig& cfg) {
    return {VaeEncoderNet::make(cfg, false), VaeDecoderNet::make(cfg, false),
            UNetFuseNet::make(cfg, false), AudioProjection::make(cfg)};
}

std::vector<Var> Stage2Nets::trainable_params() {
    std::vector<Var> out;
    for (auto& group : {enc.params(), dec.params(), unet.params()})
        out.insert(out.end(), group.begin(), group.end());
    return out;
}

}  // namespace avth
