#include "avth/lipsync.hpp"

#include <cmath>

#include "avth/error.hpp"
#include "avth/media_io.hpp"
#include "avth/parallel.hpp"
#include "avth/util.hpp"

namespace avth {

using nn::Tensor;
using nn::Var;

// ---------------------------------------------------------------------------
// Resampling

namespace {

double bessel_i0(double x) {
    // Power series; converges quickly for the arguments seen here.
    double sum = 1.0, term = 1.0;
    double hx = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (hx / k) * (hx / k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    double px = M_PI * x;
    return std::sin(px) / px;
}

}  // namespace

AudioClip resample_audio(const AudioClip& clip, int target_rate) {
    if (clip.samples.empty()) throw FormatError("cannot resample an empty clip");
    if (clip.sample_rate <= 0 || target_rate <= 0)
        throw ConfigError("sample rates must be positive");
    if (clip.sample_rate == target_rate) return clip;

    double ratio = static_cast<double>(target_rate) / clip.sample_rate;
    double cutoff = std::min(1.0, ratio);
    double half_width = 32.0 / cutoff;
    constexpr double kBeta = 8.0;
    double i0_beta = bessel_i0(kBeta);

    size_t out_len = static_cast<size_t>(iround(static_cast<double>(clip.samples.size()) *
                                                target_rate / clip.sample_rate));
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    long n_in = static_cast<long>(clip.samples.size());
    for (size_t n = 0; n < out_len; ++n) {
        double t = static_cast<double>(n) / ratio;  // position in input samples
        long j0 = static_cast<long>(std::ceil(t - half_width));
        long j1 = static_cast<long>(std::floor(t + half_width));
        double acc = 0;
        for (long j = std::max(0l, j0); j <= std::min(n_in - 1, j1); ++j) {
            double tau = t - j;
            double win = tau / half_width;
            double kaiser = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - win * win))) / i0_beta;
            acc += clip.samples[j] * cutoff * sinc(cutoff * tau) * kaiser;
        }
        out.samples[n] = clamp_i16(acc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Log-mel spectrogram

namespace {

constexpr int kFft = 400;
constexpr int kHop = 160;
constexpr int kSpecBins = kFft / 2 + 1;
constexpr double kLogFloor = 1e-10;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Bouncing reflection into [0, n).
long reflect_index(long i, long n) {
    if (n == 1) return 0;
    long period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

struct MelBank {
    // weights[bin] -> list of (filter, weight); built once.
    std::vector<std::vector<std::pair<int, double>>> weights;
    std::vector<double> centers_hz;

    MelBank() {
        double m_hi = hz_to_mel(8000.0);
        std::vector<double> pts(MelSpectrogram::kBins + 2);
        for (size_t i = 0; i < pts.size(); ++i)
            pts[i] = mel_to_hz(m_hi * static_cast<double>(i) / (pts.size() - 1));
        centers_hz.assign(pts.begin() + 1, pts.end() - 1);
        weights.resize(kSpecBins);
        for (int k = 0; k < kSpecBins; ++k) {
            double fk = 16000.0 * k / kFft;
            for (int f = 0; f < MelSpectrogram::kBins; ++f) {
                double rise = (fk - pts[f]) / std::max(1e-9, pts[f + 1] - pts[f]);
                double fall = (pts[f + 2] - fk) / std::max(1e-9, pts[f + 2] - pts[f + 1]);
                double wgt = std::max(0.0, std::min(rise, fall));
                if (wgt > 0) weights[k].push_back({f, wgt});
            }
        }
    }
};

const MelBank& mel_bank() {
    static const MelBank bank;
    return bank;
}

}  // namespace

MelSpectrogram log_mel(const AudioClip& clip16k) {
    if (clip16k.sample_rate != 16000) throw ConfigError("log_mel expects a 16 kHz clip");
    long n = static_cast<long>(clip16k.samples.size());
    if (n < kHop) throw FormatError("clip shorter than one hop");

    static const auto window = [] {
        std::array<double, kFft> w{};
        for (int i = 0; i < kFft; ++i)
            w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / kFft));
        return w;
    }();
    static const auto twiddle = [] {
        // cos/sin tables for the first kSpecBins DFT bins.
        std::vector<double> t(static_cast<size_t>(kSpecBins) * kFft * 2);
        for (int k = 0; k < kSpecBins; ++k)
            for (int i = 0; i < kFft; ++i) {
                double ang = -2.0 * M_PI * k * i / kFft;
                t[(static_cast<size_t>(k) * kFft + i) * 2] = std::cos(ang);
                t[(static_cast<size_t>(k) * kFft + i) * 2 + 1] = std::sin(ang);
            }
        return t;
    }();

    int frames = 1 + static_cast<int>(n / kHop);
    MelSpectrogram mel;
    mel.frames = Tensor({frames, MelSpectrogram::kBins});
    const MelBank& bank = mel_bank();

    std::vector<double> buf(kFft);
    std::vector<double> power(kSpecBins);
    for (int t = 0; t < frames; ++t) {
        long start = static_cast<long>(t) * kHop - kFft / 2;
        for (int i = 0; i < kFft; ++i) {
            long idx = reflect_index(start + i, n);
            buf[i] = clip16k.samples[idx] / 32768.0 * window[i];
        }
        for (int k = 0; k < kSpecBins; ++k) {
            double re = 0, im = 0;
            const double* tw = twiddle.data() + static_cast<size_t>(k) * kFft * 2;
            for (int i = 0; i < kFft; ++i) {
                re += buf[i] * tw[2 * i];
                im += buf[i] * tw[2 * i + 1];
            }
            power[k] = re * re + im * im;
        }
        for (int f = 0; f < MelSpectrogram::kBins; ++f)
            mel.frames[static_cast<size_t>(t) * MelSpectrogram::kBins + f] = 0.0;
        for (int k = 0; k < kSpecBins; ++k)
            for (const auto& [f, wgt] : bank.weights[k])
                mel.frames[static_cast<size_t>(t) * MelSpectrogram::kBins + f] += wgt * power[k];
        for (int f = 0; f < MelSpectrogram::kBins; ++f) {
            double& cell = mel.frames[static_cast<size_t>(t) * MelSpectrogram::kBins + f];
            cell = std::log(cell + kLogFloor);
        }
    }
    return mel;
}

std::vector<double> mel_filter_centers_hz() { return mel_bank().centers_hz; }

// ---------------------------------------------------------------------------
// Audio features

AudioFeatureSequence audio_encode(const MelSpectrogram& mel, const AudioProjection& net) {
    int t = mel.count();
    if (t < 2) throw ShapeError("audio_encode needs at least two mel frames");
    int d = net.proj.b->val.shape[0];
    const Tensor& w = net.proj.w->val;
    Tensor proj({t, d});
    for (int r = 0; r < t; ++r)
        for (int j = 0; j < d; ++j) {
            double s = net.proj.b->val[j];
            for (int k = 0; k < MelSpectrogram::kBins; ++k)
                s += mel.frames[static_cast<size_t>(r) * MelSpectrogram::kBins + k] *
                     w[static_cast<size_t>(k) * d + j];
            proj[static_cast<size_t>(r) * d + j] = s;
        }
    int t2 = t / 2;
    AudioFeatureSequence out;
    out.features = Tensor({t2, d});
    for (int r = 0; r < t2; ++r)
        for (int j = 0; j < d; ++j)
            out.features[static_cast<size_t>(r) * d + j] =
                0.5 * (proj[static_cast<size_t>(2 * r) * d + j] +
                       proj[static_cast<size_t>(2 * r + 1) * d + j]);
    return out;
}

std::vector<long> window_indices_unclamped(long frame_index) {
    std::vector<long> idx(10);
    for (int j = 0; j < 10; ++j) idx[j] = 2 * frame_index - 4 + j;
    return idx;
}

AudioWindow window_for_frame(const AudioFeatureSequence& seq, int frame_index) {
    if (frame_index < 0) throw ConfigError("frame index must be nonnegative");
    int t = seq.count();
    if (t == 0) throw ShapeError("empty audio feature sequence");
    int d = seq.dim();
    AudioWindow win;
    win.features = Tensor({10, d});
    auto rows = window_indices_unclamped(frame_index);
    for (int j = 0; j < 10; ++j) {
        long r = std::clamp<long>(rows[j], 0, t - 1);
        for (int c = 0; c < d; ++c)
            win.features[static_cast<size_t>(j) * d + c] =
                seq.features[static_cast<size_t>(r) * d + c];
    }
    return win;
}

// ---------------------------------------------------------------------------
// Frames and latents

Frame mask_lower_half(const Frame& frame) {
    frame.validate();
    Frame out = frame;
    for (int p = 0; p < out.plane_count(); ++p) {
        int hp = out.plane_height(p), wp = out.plane_width(p);
        int start = hp - (hp + 1) / 2;  // lower ceil(h/2) rows
        for (int y = start; y < hp; ++y)
            for (int x = 0; x < wp; ++x) out.at(p, y, x) = 0;
    }
    return out;
}

LatentFeature vae_encode(const Frame& frame, const VaeEncoderNet& net) {
    Frame rgb = frame.color == ColorTag::Rgb ? frame : yuv_to_rgb(frame);
    if (rgb.width % 8 || rgb.height % 8)
        throw ShapeError("vae_encode needs dimensions divisible by 8");
    Var z = net.fwd(nn::constant(frame_to_tensor01(rgb)));
    return {z->val};
}

Frame vae_decode(const LatentFeature& latent, const VaeDecoderNet& net) {
    if (latent.data.shape.size() != 3) throw ShapeError("latent must be [L,h,w]");
    Var out01 = net.fwd(nn::constant(latent.data));
    return tensor01_to_frame(out01->val);
}

LatentFeature unet_fuse(const LatentFeature& v_ref, const LatentFeature& v_mask,
                        const AudioWindow& audio, const UNetFuseNet& net,
                        nn::Tensor* attention_out) {
    Var fused = net.fwd(nn::constant(v_ref.data), nn::constant(v_mask.data),
                        nn::constant(audio.features), attention_out);
    return {fused->val};
}

void mouth_crop_rect(int w, int h, int& x0, int& y0, int& cw, int& ch) {
    y0 = h / 2;
    ch = h - y0;
    x0 = w / 4;
    cw = w / 2;
}

FrameSequence stage2_reconstruct(const FrameSequence& tr_frames, const AudioClip& clip,
                                 const Stage2Nets& nets, const NetConfig& cfg,
                                 int frame_index_offset) {
    (void)cfg;
    AudioFeatureSequence feats =
        audio_encode(log_mel(resample_audio(clip, 16000)), nets.aproj);
    if (feats.count() == 0) throw FormatError("audio too short for any feature row");

    FrameSequence out;
    out.fps = tr_frames.fps;
    out.frames.resize(tr_frames.size());
    // Frames are independent given the read-only nets and feature sequence.
    parallel_for(tr_frames.size(), [&](size_t j) {
        const Frame& tr = tr_frames.frames[j];
        LatentFeature v_ref = vae_encode(tr, nets.enc);
        LatentFeature v_mask = vae_encode(mask_lower_half(tr), nets.enc);
        AudioWindow win = window_for_frame(feats, static_cast<int>(j) + frame_index_offset);
        LatentFeature fused = unet_fuse(v_ref, v_mask, win, nets.unet);
        out.frames[j] = vae_decode(fused, nets.dec);
    });
    return out;
}

}  // namespace avth
