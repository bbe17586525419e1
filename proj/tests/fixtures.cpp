#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>

#include "avth/media_io.hpp"
#include "avth/util.hpp"

namespace avth::testfix {

double mouth_envelope(double seconds) {
    return 0.5 * (1.0 + std::sin(2.0 * M_PI * 2.0 * seconds - M_PI / 2.0));
}

namespace {

// Soft-edged ellipse coverage in [0,1].
double ellipse(double x, double y, double cx, double cy, double rx, double ry, double soft) {
    double dx = (x - cx) / rx, dy = (y - cy) / ry;
    double d = std::sqrt(dx * dx + dy * dy);
    return std::clamp((1.0 - d) / soft + 0.5, 0.0, 1.0);
}

}  // namespace

Frame head_frame_rgb(int w, int h, double seconds) {
    Frame f = Frame::make(w, h, ColorTag::Rgb);
    double open = mouth_envelope(seconds);
    double sway_x = 0.03 * std::sin(2.0 * M_PI * 0.4 * seconds);
    double sway_y = 0.015 * std::sin(2.0 * M_PI * 0.27 * seconds + 0.8);
    double cx = 0.5 + sway_x, cy = 0.46 + sway_y;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double u = (x + 0.5) / w, v = (y + 0.5) / h;
            // Mid-range gradient background.
            double r = 90 + 50 * v, g = 95 + 40 * v, b = 110 + 30 * u;

            double head = ellipse(u, v, cx, cy, 0.30, 0.38, 0.10);
            r = r + head * (190 - r);
            g = g + head * (150 - g);
            b = b + head * (125 - b);

            double eye_l = ellipse(u, v, cx - 0.11, cy - 0.10, 0.045, 0.032, 0.35);
            double eye_r = ellipse(u, v, cx + 0.11, cy - 0.10, 0.045, 0.032, 0.35);
            double eye = std::max(eye_l, eye_r);
            r = r + eye * (70 - r);
            g = g + eye * (65 - g);
            b = b + eye * (75 - b);

            double mouth = ellipse(u, v, cx, cy + 0.20, 0.085, 0.012 + 0.045 * open, 0.30);
            r = r + mouth * (150 - r);
            g = g + mouth * (70 - g);
            b = b + mouth * (80 - b);

            size_t i = static_cast<size_t>(y) * w + x;
            f.planes[0][i] = clamp_u8(r);
            f.planes[1][i] = clamp_u8(g);
            f.planes[2][i] = clamp_u8(b);
        }
    }
    return f;
}

Frame head_frame_420(int w, int h, double seconds) {
    return rgb_to_yuv(head_frame_rgb(w, h, seconds));
}

FrameSequence head_sequence(int frames, int w, int h, Rational fps) {
    FrameSequence seq;
    seq.fps = fps;
    seq.frames.reserve(frames);
    for (int i = 0; i < frames; ++i)
        seq.frames.push_back(head_frame_420(w, h, i / fps.value()));
    return seq;
}

AudioClip speech_audio(double seconds, int sample_rate) {
    AudioClip clip;
    clip.sample_rate = sample_rate;
    size_t n = static_cast<size_t>(seconds * sample_rate);
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / sample_rate;
        double env = 0.15 + 0.85 * mouth_envelope(t);
        double s = 0.5 * std::sin(2.0 * M_PI * 220.0 * t) +
                   0.3 * std::sin(2.0 * M_PI * 440.0 * t) +
                   0.2 * std::sin(2.0 * M_PI * 660.0 * t);
        clip.samples[i] = clamp_i16(0.35 * env * s * 32767.0);
    }
    return clip;
}

std::string temp_path(const std::string& name) {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() /
                 ("avth-tests-" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d;
    }();
    static std::atomic<int> counter{0};
    return (dir / (std::to_string(counter++) + "-" + name)).string();
}

}  // namespace avth::testfix
