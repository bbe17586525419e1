#include "avth/animator.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "avth/basecodec.hpp"
#include "avth/error.hpp"
#include "avth/media_io.hpp"
#include "avth/parallel.hpp"
#include "avth/util.hpp"

namespace avth {

using nn::Tensor;
using nn::Var;

Frame facial_sr(const Frame& aux_low, int target_w, int target_h, const FacialSrNet& net) {
    if (target_w < aux_low.width || target_h < aux_low.height)
        throw ShapeError("facial_sr target must not be smaller than the input");
    Frame rgb = aux_low.color == ColorTag::Rgb ? aux_low : yuv_to_rgb(aux_low);
    Frame up = resize_bicubic(rgb, target_w, target_h);
    Var x = nn::constant(frame_to_tensor01(up));
    Var r = net.c2.fwd(nn::tanh_(net.c1.fwd(nn::add_scalar(x, -0.5))));
    Var out = nn::clamp_(nn::add(x, r), 0.0, 1.0);
    return tensor01_to_frame(out->val);
}

FeatureVolume extract_appearance(const Frame& keyframe, const AppearanceNet& net) {
    Frame rgb = keyframe.color == ColorTag::Rgb ? keyframe : yuv_to_rgb(keyframe);
    Var f = net.fwd(nn::constant(frame_to_tensor01(rgb)));
    return {f->val};
}

MotionParams extract_motion(const Frame& frame, const MotionNet& net) {
    Frame rgb = frame.color == ColorTag::Rgb ? frame : yuv_to_rgb(frame);
    Tensor raw = net.raw_outputs(rgb);
    int k = net.keypoints;
    if (raw.size() != static_cast<size_t>(7 + 3 * k))
        throw ShapeError("motion head emitted the wrong number of outputs");
    MotionParams p;
    double pitch = 0.3 * std::tanh(raw[0]);
    double yaw = 0.3 * std::tanh(raw[1]);
    double roll = 0.3 * std::tanh(raw[2]);
    p.rotation = rotation_from_euler(pitch, yaw, roll);
    p.scale = std::exp(0.2 * std::tanh(raw[3]));
    p.translation = {0.2 * std::tanh(raw[4]), 0.2 * std::tanh(raw[5]), 0.2 * std::tanh(raw[6])};
    p.expression.resize(k);
    for (int i = 0; i < k; ++i)
        p.expression[i] = {0.08 * std::tanh(raw[7 + 3 * i]), 0.08 * std::tanh(raw[8 + 3 * i]),
                           0.08 * std::tanh(raw[9 + 3 * i])};
    return p;
}

// ---------------------------------------------------------------------------
// Warp

namespace {

struct WarpGrid {
    int d, h, w;
    double sx, sy, sz;  // index units per normalized unit, per axis

    WarpGrid(int d_, int h_, int w_)
        : d(d_), h(h_), w(w_),
          sx(w_ > 1 ? (w_ - 1) / 2.0 : 0.0),
          sy(h_ > 1 ? (h_ - 1) / 2.0 : 0.0),
          sz(d_ > 1 ? (d_ - 1) / 2.0 : 0.0) {}

    Vec3 normalized(int iz, int iy, int ix) const {
        return {w > 1 ? -1.0 + 2.0 * ix / (w - 1) : 0.0,
                h > 1 ? -1.0 + 2.0 * iy / (h - 1) : 0.0,
                d > 1 ? -1.0 + 2.0 * iz / (d - 1) : 0.0};
    }
};

// Softmax weights of the keypoints at grid point p.
void keypoint_weights(const Vec3& p, const KeypointSet& x_key, double sigma,
                      std::vector<double>& w) {
    size_t k = x_key.count();
    w.resize(k);
    double inv = 1.0 / (2.0 * sigma * sigma);
    double mx = -1e300;
    for (size_t i = 0; i < k; ++i) {
        Vec3 d = p - x_key.points[i];
        w[i] = -(d.x * d.x + d.y * d.y + d.z * d.z) * inv;
        mx = std::max(mx, w[i]);
    }
    double sum = 0;
    for (size_t i = 0; i < k; ++i) {
        w[i] = std::exp(w[i] - mx);
        sum += w[i];
    }
    for (size_t i = 0; i < k; ++i) w[i] /= sum;
}

void check_keypoints(const KeypointSet& a, const KeypointSet& b) {
    if (a.count() == 0 || a.count() != b.count())
        throw ShapeError("warp keypoint sets must be nonempty and share K");
}

// Trilinear sample of channel plane at index-space (fz,fy,fx); corners
// outside the grid contribute zero. Optionally emits the value gradient with
// respect to the index coordinates.
double sample_trilinear(const Tensor& vol, int c, double fz, double fy, double fx,
                        Vec3* grad_idx) {
    int d = vol.shape[1], h = vol.shape[2], w = vol.shape[3];
    double flz = std::floor(fz), fly = std::floor(fy), flx = std::floor(fx);
    int z0 = static_cast<int>(flz), y0 = static_cast<int>(fly), x0 = static_cast<int>(flx);
    double tz = fz - flz, ty = fy - fly, tx = fx - flx;
    auto at = [&](int z, int y, int x) -> double {
        if (z < 0 || z >= d || y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return vol.v[((static_cast<size_t>(c) * d + z) * h + y) * w + x];
    };
    double c000 = at(z0, y0, x0), c001 = at(z0, y0, x0 + 1);
    double c010 = at(z0, y0 + 1, x0), c011 = at(z0, y0 + 1, x0 + 1);
    double c100 = at(z0 + 1, y0, x0), c101 = at(z0 + 1, y0, x0 + 1);
    double c110 = at(z0 + 1, y0 + 1, x0), c111 = at(z0 + 1, y0 + 1, x0 + 1);

    double c00 = c000 + tx * (c001 - c000);
    double c01 = c010 + tx * (c011 - c010);
    double c10 = c100 + tx * (c101 - c100);
    double c11 = c110 + tx * (c111 - c110);
    double c0 = c00 + ty * (c01 - c00);
    double c1 = c10 + ty * (c11 - c10);
    double value = c0 + tz * (c1 - c0);
    if (grad_idx) {
        double dx0 = (c001 - c000) + ty * ((c011 - c010) - (c001 - c000));
        double dx1 = (c101 - c100) + ty * ((c111 - c110) - (c101 - c100));
        grad_idx->x = dx0 + tz * (dx1 - dx0);
        double dy0 = (c01 - c00), dy1 = (c11 - c10);
        grad_idx->y = dy0 + tz * (dy1 - dy0);
        grad_idx->z = c1 - c0;
    }
    return value;
}

}  // namespace

nn::Tensor warp_flow(int depth, int height, int width, const KeypointSet& x_key,
                     const KeypointSet& x_trg, double sigma) {
    check_keypoints(x_key, x_trg);
    if (!(sigma > 0)) throw ConfigError("warp sigma must be positive");
    WarpGrid grid(depth, height, width);
    Tensor flow({3, depth, height, width});
    std::vector<double> w;
    size_t plane = static_cast<size_t>(depth) * height * width;
    for (int iz = 0; iz < depth; ++iz)
        for (int iy = 0; iy < height; ++iy)
            for (int ix = 0; ix < width; ++ix) {
                keypoint_weights(grid.normalized(iz, iy, ix), x_key, sigma, w);
                Vec3 u{0, 0, 0};
                for (size_t k = 0; k < w.size(); ++k) {
                    Vec3 shift = x_trg.points[k] - x_key.points[k];
                    u = u + shift * w[k];
                }
                size_t i = (static_cast<size_t>(iz) * height + iy) * width + ix;
                flow.v[i] = u.x;
                flow.v[plane + i] = u.y;
                flow.v[2 * plane + i] = u.z;
            }
    return flow;
}

FeatureVolume warp(const FeatureVolume& volume, const KeypointSet& x_key,
                   const KeypointSet& x_trg, double sigma) {
    check_keypoints(x_key, x_trg);
    if (!(sigma > 0)) throw ConfigError("warp sigma must be positive");
    if (volume.data.shape.size() != 4) throw ShapeError("warp expects a [C,D,H,W] volume");
    int c = volume.channels(), d = volume.depth(), h = volume.height(), w = volume.width();
    WarpGrid grid(d, h, w);
    Tensor out({c, d, h, w});
    std::vector<double> wk;
    for (int iz = 0; iz < d; ++iz)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                keypoint_weights(grid.normalized(iz, iy, ix), x_key, sigma, wk);
                Vec3 u{0, 0, 0};
                for (size_t k = 0; k < wk.size(); ++k) {
                    Vec3 shift = x_trg.points[k] - x_key.points[k];
                    u = u + shift * wk[k];
                }
                // Sample position in index space; exact when u is zero.
                double fx = ix - u.x * grid.sx;
                double fy = iy - u.y * grid.sy;
                double fz = iz - u.z * grid.sz;
                for (int ci = 0; ci < c; ++ci)
                    out.v[((static_cast<size_t>(ci) * d + iz) * h + iy) * w + ix] =
                        sample_trilinear(volume.data, ci, fz, fy, fx, nullptr);
            }
    return {std::move(out)};
}

std::vector<Vec3> warp_grad_keypoints(const FeatureVolume& volume, const KeypointSet& x_key,
                                      const KeypointSet& x_trg, double sigma) {
    check_keypoints(x_key, x_trg);
    int c = volume.channels(), d = volume.depth(), h = volume.height(), w = volume.width();
    WarpGrid grid(d, h, w);
    double inv_n = 1.0 / static_cast<double>(volume.data.size());
    std::vector<Vec3> grad(x_trg.count());
    std::vector<double> wk;
    for (int iz = 0; iz < d; ++iz)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                keypoint_weights(grid.normalized(iz, iy, ix), x_key, sigma, wk);
                Vec3 u{0, 0, 0};
                for (size_t k = 0; k < wk.size(); ++k) {
                    Vec3 shift = x_trg.points[k] - x_key.points[k];
                    u = u + shift * wk[k];
                }
                double fx = ix - u.x * grid.sx;
                double fy = iy - u.y * grid.sy;
                double fz = iz - u.z * grid.sz;
                Vec3 gsum{0, 0, 0};
                for (int ci = 0; ci < c; ++ci) {
                    Vec3 gi;
                    sample_trilinear(volume.data, ci, fz, fy, fx, &gi);
                    gsum = gsum + gi;
                }
                // d(sample)/d(x_trg_k) = grad_idx * d(index)/d(u) * w_k,
                // with d(index)/d(u) = -scale per axis.
                for (size_t k = 0; k < wk.size(); ++k) {
                    double f = wk[k] * inv_n;
                    grad[k].x += -gsum.x * grid.sx * f;
                    grad[k].y += -gsum.y * grid.sy * f;
                    grad[k].z += -gsum.z * grid.sz * f;
                }
            }
    return grad;
}

Frame generate(const FeatureVolume& volume, const GeneratorNet& net) {
    Var out01 = net.fwd(nn::constant(volume.data));
    return tensor01_to_frame(out01->val);
}

namespace {

void append_f32_le(std::string& out, double v) {
    float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void dump_string(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace

void write_f32_sidecar(const std::string& path, const std::vector<const KeypointSet*>& sets) {
    std::string out;
    for (const KeypointSet* s : sets)
        for (const Vec3& p : s->points) {
            append_f32_le(out, p.x);
            append_f32_le(out, p.y);
            append_f32_le(out, p.z);
        }
    dump_string(path, out);
}

void write_f32_sidecar(const std::string& path, const nn::Tensor& tensor) {
    std::string out;
    for (double v : tensor.v) append_f32_le(out, v);
    dump_string(path, out);
}

std::vector<float> read_f32_sidecar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    if (bytes.size() % 4) throw FormatError(path + ": not a multiple of 4 bytes");
    std::vector<float> out(bytes.size() / 4);
    for (size_t i = 0; i < out.size(); ++i) {
        uint32_t bits = 0;
        for (int b = 3; b >= 0; --b)
            bits = (bits << 8) | static_cast<uint8_t>(bytes[4 * i + b]);
        std::memcpy(&out[i], &bits, 4);
    }
    return out;
}

FrameSequence stage1_reconstruct(const Frame& keyframe, const FrameSequence& aux_frames,
                                 const Stage1Nets& nets, const NetConfig& cfg,
                                 Stage1Debug* debug) {
    if (aux_frames.frames.empty()) {
        FrameSequence empty;
        empty.fps = aux_frames.fps;
        return empty;
    }
    for (const Frame& f : aux_frames.frames)
        if (f.width != keyframe.width || f.height != keyframe.height)
            throw ShapeError("auxiliary frames must already match keyframe dimensions");

    CanonicalKeypoints canonical = canonical_face_template(cfg.keypoints);
    std::vector<int> mouth_idx = default_mouth_indices(cfg.keypoints);

    FeatureVolume f_key = extract_appearance(keyframe, nets.app);
    MotionParams p_key = extract_motion(keyframe, nets.mot);
    MotionParams p_ref = extract_motion(aux_frames.frames[0], nets.mot);
    KeypointSet x_key = compose_key(canonical, p_key);

    if (debug) {
        debug->x_key = x_key;
        debug->x_trg.assign(aux_frames.size(), KeypointSet{});
    }
    FrameSequence out;
    out.fps = aux_frames.fps;
    out.frames.resize(aux_frames.size());
    // Frames are independent given the shared read-only nets and f_key.
    parallel_for(aux_frames.size(), [&](size_t i) {
        MotionParams p_i = extract_motion(aux_frames.frames[i], nets.mot);
        KeypointSet pre = compose_target(canonical, p_key, p_ref, p_i,
                                         MouthOffset::zeros(canonical.count()));
        MouthOffset mouth =
            mouth_retarget(pre, mouth_idx, canonical.points, cfg.mouth_alpha);
        KeypointSet x_trg = compose_target(canonical, p_key, p_ref, p_i, mouth);
        if (debug) debug->x_trg[i] = x_trg;
        FeatureVolume warped = warp(f_key, x_key, x_trg, cfg.sigma);
        out.frames[i] = generate(warped, nets.gen);
    });
    return out;
}

}  // namespace avth
