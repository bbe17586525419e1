#include <doctest.h>

#include <cmath>
#include <fstream>

#include "avth/error.hpp"
#include "avth/training.hpp"
#include "avth/util.hpp"
#include "fixtures.hpp"

using namespace avth;
using nn::Tensor;
using nn::Var;

namespace {

NetConfig small_cfg() {
    NetConfig cfg;
    cfg.frame_w = 32;
    cfg.frame_h = 32;
    return cfg;
}

std::vector<TrainSample> toy_dataset(int n, int w, int h, const NetConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    AudioProjection aproj = AudioProjection::make(cfg);
    AudioFeatureSequence feats =
        audio_encode(log_mel(testfix::speech_audio(1.0, 16000)), aproj);
    std::vector<TrainSample> out;
    for (int i = 0; i < n; ++i) {
        TrainSample s;
        s.tr = testfix::head_frame_rgb(w, h, 0.07 * i);
        s.gt = testfix::head_frame_rgb(w, h, 0.07 * i + 0.02);
        s.window = window_for_frame(feats, i);
        out.push_back(std::move(s));
    }
    (void)rng;
    return out;
}

FrameSequence constant_sequence(int n, int w, int h, uint8_t value) {
    FrameSequence seq;
    seq.fps = {25, 1};
    for (int i = 0; i < n; ++i) seq.frames.push_back(Frame::make(w, h, ColorTag::Rgb, value));
    return seq;
}

}  // namespace

TEST_CASE("sync probability closed forms") {
    CHECK(neg_log_sync_prob(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(neg_log_sync_prob(0.0) - std::log(2.0)) < 1e-9);
    CHECK(std::abs(neg_log_sync_prob(-1.0) - 6.0 * std::log(10.0)) < 1e-9);
    // Monotone decreasing in the cosine, bounded by the clamp.
    double prev = neg_log_sync_prob(-1.0);
    CHECK(prev <= 6.0 * std::log(10.0) + 1e-12);
    for (double s = -0.95; s <= 1.0; s += 0.05) {
        double cur = neg_log_sync_prob(s);
        CHECK(cur <= prev + 1e-12);
        CHECK(cur >= 0.0);
        prev = cur;
    }
}

TEST_CASE("loss_rec basics") {
    FrameSequence a = constant_sequence(3, 8, 8, 0);
    CHECK(loss_rec(a, a) == 0.0);

    FrameSequence b = constant_sequence(3, 8, 8, 128);
    CHECK(loss_rec(b, a) == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(loss_rec(a, b) == loss_rec(b, a));

    FrameSequence c = constant_sequence(2, 8, 8, 0);
    CHECK_THROWS_AS(loss_rec(a, c), ShapeError);
    FrameSequence d = constant_sequence(3, 16, 8, 0);
    CHECK_THROWS_AS(loss_rec(a, d), ShapeError);
}

TEST_CASE("loss_perceptual is a nonnegative distance") {
    PerceptualNet net = PerceptualNet::make(77);
    FrameSequence a;
    a.fps = {25, 1};
    a.frames.push_back(testfix::head_frame_rgb(32, 32, 0.0));
    CHECK(loss_perceptual(a, a, net) == 0.0);

    FrameSequence b;
    b.fps = {25, 1};
    b.frames.push_back(testfix::head_frame_rgb(32, 32, 0.5));
    double d = loss_perceptual(a, b, net);
    CHECK(d > 0.0);
    CHECK(std::isfinite(d));
}

TEST_CASE("loss_total composes Eq.-style weights") {
    LossWeights w;  // lambda 0.01, mu 0.03
    CHECK(std::abs(loss_total(1, 1, 1, w) - 1.04) < 1e-12);
    CHECK(loss_total(0, 0, 0, w) == 0.0);
    CHECK(std::abs(loss_total(2, 10, 0, w) - 2.1) < 1e-12);

    // Linearity in each slot.
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        double r1 = rng.normal(0, 1), p1 = rng.normal(0, 1), s1 = rng.normal(0, 1);
        double r2 = rng.normal(0, 1), p2 = rng.normal(0, 1), s2 = rng.normal(0, 1);
        double lhs = loss_total(r1 + r2, p1 + p2, s1 + s2, w);
        double rhs = loss_total(r1, p1, s1, w) + loss_total(r2, p2, s2, w);
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
    CHECK_THROWS_AS(loss_total(std::nan(""), 0, 0, w), TrainingError);
}

TEST_CASE("loss_sync stays within the clamp bounds on fixtures") {
    NetConfig cfg = small_cfg();
    SyncScorer scorer = SyncScorer::make(cfg);
    auto data = toy_dataset(3, 32, 32, cfg, 1);
    FrameSequence frames;
    frames.fps = {25, 1};
    std::vector<AudioWindow> windows;
    for (const auto& s : data) {
        frames.frames.push_back(s.tr);
        windows.push_back(s.window);
    }
    double l = loss_sync(frames, windows, scorer);
    CHECK(l >= 0.0);
    CHECK(l <= 6.0 * std::log(10.0));

    windows.pop_back();
    CHECK_THROWS_AS(loss_sync(frames, windows, scorer), ShapeError);
}

TEST_CASE("grad_check on a quadratic is near machine precision") {
    Rng init(3);
    Tensor x({8});
    for (double& v : x.v) v = init.normal(0, 1);
    Var leafv = nn::leaf(x);
    auto fn = [&] { return nn::sum(nn::mul(leafv, leafv)); };
    Rng rng(4);
    CHECK(grad_check(fn, {leafv}, 16, 1e-5, rng) < 1e-6);
}

TEST_CASE("grad_check rejects non-finite function values") {
    Rng rng(5);
    Var bad = nn::leaf(Tensor::from({1}, {-1.0}));
    auto fn_bad = [&] { return nn::log_(bad); };  // log of a negative: NaN
    CHECK_THROWS_AS(grad_check(fn_bad, {bad}, 1, 1e-5, rng), TrainingError);
    CHECK_THROWS_AS(grad_check(fn_bad, {bad}, 1, 0.0, rng), ConfigError);
}

TEST_CASE("loss_total gradients flow through unet_fuse weights") {
    NetConfig cfg = small_cfg();
    Stage2Nets nets = Stage2Nets::make_random(cfg);
    PerceptualNet perceptual = PerceptualNet::make(cfg.seed);
    SyncScorer scorer = SyncScorer::make(cfg);
    LossWeights w;
    // gt = black keeps |recon - gt| away from the L1 kink.
    std::vector<TrainSample> samples = toy_dataset(2, 32, 32, cfg, 2);
    for (auto& s : samples) s.gt = Frame::make(32, 32, ColorTag::Rgb, 0);
    Stage2Batch batch = Stage2Batch::from_samples(samples);
    auto fn = [&] { return stage2_loss_graph(nets, batch, w, perceptual, scorer).total; };
    Rng rng(6);
    double err = grad_check(fn, nets.unet.params(), 64, 1e-4, rng);
    CHECK(err < 1e-3);
}

TEST_CASE("sync scorer embeddings are unit vectors") {
    NetConfig cfg = small_cfg();
    SyncScorer scorer = SyncScorer::make(cfg);
    Rng rng(71);
    Tensor win({10, cfg.audio_dim});
    for (double& v : win.v) v = rng.normal(0, 2);
    Var ea = scorer.embed_audio(nn::constant(win));
    Tensor crop({3, 12, 20});
    for (double& v : crop.v) v = rng.uniform();
    Var em = scorer.embed_mouth(nn::constant(crop));
    for (Var e : {ea, em}) {
        double norm = 0;
        for (double v : e->val.v) norm += v * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
    }
}

TEST_CASE("unet_fuse gradients flow into the audio-window entries") {
    NetConfig cfg = small_cfg();
    Stage2Nets nets = Stage2Nets::make_random(cfg);
    Frame f = testfix::head_frame_rgb(32, 32, 0.1);
    Var v_ref = nn::constant(frame_to_tensor01(f));
    Var v_mask = nn::constant(frame_to_tensor01(mask_lower_half(f)));
    Rng init(72);
    Tensor win({10, cfg.audio_dim});
    for (double& v : win.v) v = init.normal(0, 1);
    Var win_leaf = nn::leaf(win);
    auto fn = [&] {
        Var zr = nets.enc.fwd(v_ref);
        Var zm = nets.enc.fwd(v_mask);
        Var fused = nets.unet.fwd(zr, zm, win_leaf);
        return nn::mean(nn::mul(fused, fused));
    };
    Rng rng(73);
    CHECK(grad_check(fn, {win_leaf}, 32, 1e-4, rng) < 1e-3);
}

TEST_CASE("loss_sync gradients flow into the mouth-crop pixels") {
    NetConfig cfg = small_cfg();
    SyncScorer scorer = SyncScorer::make(cfg);
    Rng init(7);
    Tensor crop({3, 16, 16});
    for (double& v : crop.v) v = 0.3 + 0.4 * init.uniform();
    Var crop_leaf = nn::leaf(crop);
    Tensor win({10, cfg.audio_dim});
    for (double& v : win.v) v = init.normal(0, 1);
    Var win_const = nn::constant(win);
    auto fn = [&] {
        Var em = scorer.embed_mouth(crop_leaf);
        Var ea = scorer.embed_audio(win_const);
        Var s = nn::dot(ea, em);
        Var p = nn::clamp_(nn::scale(nn::add_scalar(s, 1.0), 0.5), 1e-6, 1.0);
        return nn::scale(nn::log_(p), -1.0);
    };
    Rng rng(8);
    CHECK(grad_check(fn, {crop_leaf}, 32, 1e-4, rng) < 1e-3);
}

TEST_CASE("finetune with lr=0 leaves the loss flat") {
    NetConfig cfg = small_cfg();
    Stage2Nets nets = Stage2Nets::make_random(cfg);
    PerceptualNet perceptual = PerceptualNet::make(cfg.seed);
    SyncScorer scorer = SyncScorer::make(cfg);
    auto trace = finetune(nets, toy_dataset(2, 32, 32, cfg, 3), 5, 0.0, LossWeights{},
                          perceptual, scorer);
    REQUIRE(trace.size() == 5);
    for (const TraceRow& r : trace) CHECK(r.total == trace[0].total);
}

TEST_CASE("a short finetune run reduces the loss deterministically") {
    NetConfig cfg = small_cfg();
    auto data = toy_dataset(2, 32, 32, cfg, 4);
    PerceptualNet perceptual = PerceptualNet::make(cfg.seed);
    SyncScorer scorer = SyncScorer::make(cfg);

    Stage2Nets a = Stage2Nets::make_random(cfg);
    auto trace_a = finetune(a, data, 30, 0.05, LossWeights{}, perceptual, scorer);
    CHECK(trace_a.back().total < trace_a.front().total);

    Stage2Nets b = Stage2Nets::make_random(cfg);
    auto trace_b = finetune(b, data, 30, 0.05, LossWeights{}, perceptual, scorer);
    REQUIRE(trace_a.size() == trace_b.size());
    for (size_t i = 0; i < trace_a.size(); ++i) CHECK(trace_a[i].total == trace_b[i].total);
}

TEST_CASE("divergence is reported with its step index") {
    NetConfig cfg = small_cfg();
    Stage2Nets nets = Stage2Nets::make_random(cfg);
    PerceptualNet perceptual = PerceptualNet::make(cfg.seed);
    SyncScorer scorer = SyncScorer::make(cfg);
    auto data = toy_dataset(1, 32, 32, cfg, 5);
    data[0].window.features[3] = std::nan("");
    CHECK_THROWS_WITH_AS(finetune(nets, data, 3, 0.1, LossWeights{}, perceptual, scorer),
                         doctest::Contains("step 0"), TrainingError);
}

TEST_CASE("finetune validates its inputs") {
    NetConfig cfg = small_cfg();
    Stage2Nets nets = Stage2Nets::make_random(cfg);
    PerceptualNet perceptual = PerceptualNet::make(cfg.seed);
    SyncScorer scorer = SyncScorer::make(cfg);
    CHECK_THROWS_AS(finetune(nets, {}, 3, 0.1, LossWeights{}, perceptual, scorer), ShapeError);
}

TEST_CASE("loss traces serialize to CSV") {
    std::vector<TraceRow> trace{{0, 1, 2, 3, 4}, {1, 0.5, 1.5, 2.5, 3.5}};
    std::string path = testfix::temp_path("trace.csv");
    write_loss_trace(trace, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,rec,p,sync,total");
    std::getline(in, line);
    CHECK(line == "0,1,2,3,4");
    std::getline(in, line);
    CHECK(line == "1,0.5,1.5,2.5,3.5");
}
