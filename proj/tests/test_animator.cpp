#include <doctest.h>

#include <cmath>

#include "avth/animator.hpp"
#include "avth/basecodec.hpp"
#include "avth/error.hpp"
#include "avth/media_io.hpp"
#include "avth/util.hpp"
#include "fixtures.hpp"

using namespace avth;
using nn::Tensor;

namespace {

NetConfig cfg_for(int w, int h) {
    NetConfig cfg;
    cfg.frame_w = w;
    cfg.frame_h = h;
    return cfg;
}

FeatureVolume random_volume(int c, int d, int h, int w, Rng& rng) {
    FeatureVolume v{Tensor({c, d, h, w})};
    for (double& x : v.data.v) x = rng.normal(0.0, 1.0);
    return v;
}

KeypointSet random_keypoints(size_t k, Rng& rng, double span = 0.6) {
    KeypointSet s;
    s.points.resize(k);
    for (auto& p : s.points)
        p = {rng.uniform(-span, span), rng.uniform(-span, span), rng.uniform(-span, span)};
    return s;
}

double volume_mean(const FeatureVolume& v) {
    double s = 0;
    for (double x : v.data.v) s += x;
    return s / static_cast<double>(v.data.size());
}

}  // namespace

TEST_CASE("facial_sr upsamples 128x128 to 512x512") {
    Frame low = testfix::head_frame_420(128, 128, 0.0);
    FacialSrNet net = FacialSrNet::make(99);
    Frame out = facial_sr(low, 512, 512, net);
    CHECK(out.width == 512);
    CHECK(out.height == 512);
    CHECK(out.color == ColorTag::Rgb);
    CHECK_THROWS_AS(facial_sr(low, 64, 64, net), ShapeError);
}

TEST_CASE("zeroed enhancement weights leave pure bicubic") {
    Frame low = testfix::head_frame_420(16, 16, 0.4);
    FacialSrNet net = FacialSrNet::make(5);
    for (auto& p : net.params())
        for (double& v : p->val.v) v = 0.0;
    Frame out = facial_sr(low, 64, 64, net);
    Frame bicubic = resize_bicubic(yuv_to_rgb(low), 64, 64);
    CHECK(out.planes == bicubic.planes);
}

TEST_CASE("facial_sr is deterministic under a fixed seed") {
    Frame low = testfix::head_frame_420(32, 32, 0.7);
    Frame a = facial_sr(low, 64, 64, FacialSrNet::make(1234));
    Frame b = facial_sr(low, 64, 64, FacialSrNet::make(1234));
    CHECK(a.planes == b.planes);
}

TEST_CASE("extract_appearance emits the configured volume") {
    AppearanceNet net512 = AppearanceNet::make(cfg_for(512, 512));
    Frame key = testfix::head_frame_420(512, 512, 0.0);
    FeatureVolume vol = extract_appearance(key, net512);
    CHECK(vol.data.shape == std::vector<int>{4, 4, 16, 16});

    AppearanceNet net128 = AppearanceNet::make(cfg_for(128, 128));
    FeatureVolume vol128 = extract_appearance(testfix::head_frame_420(128, 128, 0.0), net128);
    CHECK(vol128.data.shape == std::vector<int>{4, 4, 16, 16});
}

TEST_CASE("a zero image maps to a bias-driven constant per channel") {
    AppearanceNet net = AppearanceNet::make(cfg_for(64, 64));
    Frame zero = Frame::make(64, 64, ColorTag::Rgb, 0);
    FeatureVolume vol = extract_appearance(zero, net);
    int cd = vol.channels() * vol.depth();
    size_t hw = static_cast<size_t>(vol.height()) * vol.width();
    for (int c = 0; c < cd; ++c) {
        double first = vol.data[static_cast<size_t>(c) * hw];
        for (size_t i = 1; i < hw; ++i)
            CHECK(vol.data[static_cast<size_t>(c) * hw + i] == doctest::Approx(first).epsilon(1e-12));
    }
}

TEST_CASE("appearance features stay bounded on fixtures") {
    AppearanceNet net = AppearanceNet::make(cfg_for(64, 64));
    for (double t : {0.0, 0.25, 0.5}) {
        FeatureVolume vol = extract_appearance(testfix::head_frame_420(64, 64, t), net);
        for (double v : vol.data.v) {
            CHECK(std::isfinite(v));
            CHECK(std::abs(v) < 1e3);
        }
    }
}

TEST_CASE("extract_motion emits valid, deterministic, input-sensitive params") {
    NetConfig cfg = cfg_for(64, 64);
    MotionNet net = MotionNet::make(cfg);
    Frame a = testfix::head_frame_420(64, 64, 0.0);
    Frame b = testfix::head_frame_420(64, 64, 0.31);

    MotionParams pa = extract_motion(a, net);
    pa.validate(cfg.keypoints);  // orthonormal rotation, positive scale
    MotionParams pa2 = extract_motion(a, net);
    CHECK(pa.scale == pa2.scale);
    CHECK(pa.rotation.m == pa2.rotation.m);
    CHECK(pa.translation.x == pa2.translation.x);

    MotionParams pb = extract_motion(b, net);
    bool differs = pa.scale != pb.scale || pa.translation.x != pb.translation.x ||
                   pa.rotation.m != pb.rotation.m;
    CHECK(differs);
}

TEST_CASE("identity warp returns the volume exactly") {
    Rng rng(31);
    FeatureVolume vol = random_volume(4, 4, 16, 16, rng);
    KeypointSet keys = random_keypoints(21, rng);
    FeatureVolume out = warp(vol, keys, keys, 0.3);
    CHECK(out.data.v == vol.data.v);
}

TEST_CASE("a single keypoint drives a globally constant flow") {
    Rng rng(32);
    KeypointSet key = random_keypoints(1, rng);
    KeypointSet trg = key;
    trg.points[0] = trg.points[0] + Vec3{0.11, -0.07, 0.05};
    Tensor flow = warp_flow(4, 8, 8, key, trg, 0.3);
    size_t plane = 4 * 8 * 8;
    for (size_t i = 0; i < plane; ++i) {
        CHECK(flow[i] == doctest::Approx(0.11).epsilon(1e-12));
        CHECK(flow[plane + i] == doctest::Approx(-0.07).epsilon(1e-12));
        CHECK(flow[2 * plane + i] == doctest::Approx(0.05).epsilon(1e-12));
    }
}

TEST_CASE("shifting every keypoint by one cell shifts the volume") {
    Rng rng(33);
    int d = 6, h = 12, w = 12;
    FeatureVolume vol = random_volume(3, d, h, w, rng);
    KeypointSet key = random_keypoints(9, rng);
    KeypointSet trg = key;
    Vec3 cell{2.0 / (w - 1), 2.0 / (h - 1), 2.0 / (d - 1)};
    for (auto& p : trg.points) p = p + cell;

    Tensor flow = warp_flow(d, h, w, key, trg, 0.3);
    size_t plane = static_cast<size_t>(d) * h * w;
    for (size_t i = 0; i < plane; ++i) {
        CHECK(std::abs(flow[i] - cell.x) < 1e-6);
        CHECK(std::abs(flow[plane + i] - cell.y) < 1e-6);
        CHECK(std::abs(flow[2 * plane + i] - cell.z) < 1e-6);
    }

    FeatureVolume out = warp(vol, key, trg, 0.3);
    for (int c = 0; c < 3; ++c)
        for (int z = 1; z < d; ++z)
            for (int y = 1; y < h; ++y)
                for (int x = 1; x < w; ++x) {
                    double got = out.data[((static_cast<size_t>(c) * d + z) * h + y) * w + x];
                    double want =
                        vol.data[((static_cast<size_t>(c) * d + z - 1) * h + y - 1) * w + x - 1];
                    CHECK(std::abs(got - want) < 1e-6);
                }
}

TEST_CASE("analytic keypoint gradient matches finite differences") {
    // Smooth volume: a linear ramp plus a gentle sinusoid, so the trilinear
    // kinks contribute negligibly to the finite differences.
    int c = 4, d = 4, h = 16, w = 16;
    FeatureVolume vol{Tensor({c, d, h, w})};
    for (int ci = 0; ci < c; ++ci)
        for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double px = -1.0 + 2.0 * x / (w - 1);
                    double py = -1.0 + 2.0 * y / (h - 1);
                    double pz = -1.0 + 2.0 * z / (d - 1);
                    vol.data[((static_cast<size_t>(ci) * d + z) * h + y) * w + x] =
                        0.8 * (0.5 * px + 0.3 * py + 0.2 * pz) +
                        0.2 * std::sin(1.3 * px + 0.9 * py - 0.7 * pz + 0.4 * ci);
                }

    Rng rng(34);
    KeypointSet key = random_keypoints(32, rng, 0.6);
    // One-signed shifts keep the resampling points away from the trilinear
    // cell boundaries where the interpolant kinks.
    KeypointSet trg = key;
    for (auto& p : trg.points) {
        p.x += rng.uniform(0.02, 0.07);
        p.y += rng.uniform(0.02, 0.07);
        p.z += rng.uniform(0.02, 0.07);
    }

    double sigma = 0.3, fdh = 1e-4;
    std::vector<Vec3> analytic = warp_grad_keypoints(vol, key, trg, sigma);
    double worst = 0;
    for (int s = 0; s < 64; ++s) {
        size_t k = rng.below(trg.count());
        int axis = static_cast<int>(rng.below(3));
        double* coord = axis == 0 ? &trg.points[k].x : axis == 1 ? &trg.points[k].y
                                                                 : &trg.points[k].z;
        double saved = *coord;
        *coord = saved + fdh;
        double fp = volume_mean(warp(vol, key, trg, sigma));
        *coord = saved - fdh;
        double fm = volume_mean(warp(vol, key, trg, sigma));
        *coord = saved;
        double fd = (fp - fm) / (2 * fdh);
        double an = axis == 0 ? analytic[k].x : axis == 1 ? analytic[k].y : analytic[k].z;
        double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("warp validates its inputs") {
    Rng rng(35);
    FeatureVolume vol = random_volume(2, 4, 4, 4, rng);
    KeypointSet a = random_keypoints(3, rng), b = random_keypoints(4, rng);
    CHECK_THROWS_AS(warp(vol, a, b, 0.3), ShapeError);
    CHECK_THROWS_AS(warp(vol, a, a, 0.0), ConfigError);
}

TEST_CASE("equal seeds give byte-identical network parameters") {
    NetConfig cfg = cfg_for(64, 64);
    Stage1Nets a = Stage1Nets::make(cfg);
    Stage1Nets b = Stage1Nets::make(cfg);
    auto eq = [](std::vector<nn::Var> x, std::vector<nn::Var> y) {
        REQUIRE(x.size() == y.size());
        for (size_t i = 0; i < x.size(); ++i) CHECK(x[i]->val.v == y[i]->val.v);
    };
    eq(a.sr.params(), b.sr.params());
    eq(a.app.params(), b.app.params());
    eq(a.mot.params(), b.mot.params());
    eq(a.gen.params(), b.gen.params());

    NetConfig other = cfg;
    other.seed = 999;
    MotionNet different = MotionNet::make(other);
    CHECK(different.f2.w->val.v != a.mot.f2.w->val.v);
}

TEST_CASE("f32 sidecars round trip keypoints and flows") {
    Rng rng(91);
    KeypointSet a = random_keypoints(5, rng);
    KeypointSet b = random_keypoints(5, rng);
    std::string path = testfix::temp_path("kp.f32");
    write_f32_sidecar(path, {&a, &b});
    std::vector<float> vals = read_f32_sidecar(path);
    REQUIRE(vals.size() == 2 * 5 * 3);
    CHECK(vals[0] == doctest::Approx(a.points[0].x));
    CHECK(vals[15] == doctest::Approx(b.points[0].x));
    CHECK(vals[29] == doctest::Approx(b.points[4].z));

    Tensor flow = warp_flow(2, 3, 3, a, b, 0.3);
    std::string fpath = testfix::temp_path("flow.f32");
    write_f32_sidecar(fpath, flow);
    std::vector<float> fvals = read_f32_sidecar(fpath);
    REQUIRE(fvals.size() == flow.size());
    for (size_t i = 0; i < fvals.size(); ++i)
        CHECK(fvals[i] == doctest::Approx(flow[i]).epsilon(1e-6));
}

TEST_CASE("generate maps volumes to frames of the configured size") {
    NetConfig cfg = cfg_for(64, 64);
    GeneratorNet gen = GeneratorNet::make(cfg);
    Rng rng(36);
    FeatureVolume vol = random_volume(cfg.feat_c, cfg.feat_d, 16, 16, rng);
    Frame a = generate(vol, gen);
    CHECK(a.width == 64);
    CHECK(a.height == 64);
    CHECK(a.color == ColorTag::Rgb);
    Frame b = generate(vol, gen);
    CHECK(a.planes == b.planes);  // deterministic, and bytes are in range
}

TEST_CASE("generate reaches full 512x512 keyframe dimensions") {
    NetConfig cfg = cfg_for(512, 512);
    GeneratorNet gen = GeneratorNet::make(cfg);
    Rng rng(37);
    FeatureVolume vol = random_volume(cfg.feat_c, cfg.feat_d, 16, 16, rng);
    Frame f = generate(vol, gen);
    CHECK(f.width == 512);
    CHECK(f.height == 512);
}

TEST_CASE("stage1 with constant auxiliary motion yields identical TR frames") {
    NetConfig cfg = cfg_for(64, 64);
    Stage1Nets nets = Stage1Nets::make(cfg);
    Frame key = testfix::head_frame_420(64, 64, 0.0);
    FrameSequence aux;
    aux.fps = {25, 1};
    Frame one = yuv_to_rgb(testfix::head_frame_420(64, 64, 0.5));
    for (int i = 0; i < 3; ++i) aux.frames.push_back(one);
    FrameSequence tr = stage1_reconstruct(key, aux, nets, cfg);
    REQUIRE(tr.size() == 3);
    CHECK(tr.frames[1].planes == tr.frames[0].planes);
    CHECK(tr.frames[2].planes == tr.frames[0].planes);
}

TEST_CASE("stage1 emits one TR frame per target of a 60-frame GOP") {
    NetConfig cfg = cfg_for(32, 32);
    Stage1Nets nets = Stage1Nets::make(cfg);
    Frame key = testfix::head_frame_420(32, 32, 0.0);
    FrameSequence aux;
    aux.fps = {25, 1};
    for (int i = 1; i < 60; ++i)
        aux.frames.push_back(yuv_to_rgb(testfix::head_frame_420(32, 32, i / 25.0)));
    FrameSequence tr = stage1_reconstruct(key, aux, nets, cfg);
    CHECK(tr.size() == 59);
}

TEST_CASE("stage1 is deterministic end to end") {
    NetConfig cfg = cfg_for(32, 32);
    Frame key = testfix::head_frame_420(32, 32, 0.0);
    FrameSequence aux;
    aux.fps = {25, 1};
    for (int i = 1; i < 4; ++i)
        aux.frames.push_back(yuv_to_rgb(testfix::head_frame_420(32, 32, i / 25.0)));
    FrameSequence a = stage1_reconstruct(key, aux, Stage1Nets::make(cfg), cfg);
    FrameSequence b = stage1_reconstruct(key, aux, Stage1Nets::make(cfg), cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a.frames[i].planes == b.frames[i].planes);
}
