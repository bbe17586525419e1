#include <doctest.h>

#include <cmath>
#include <fstream>

#include "avth/error.hpp"
#include "avth/evaluate.hpp"
#include "avth/util.hpp"
#include "fixtures.hpp"

using namespace avth;

namespace {

Frame uniform_diff_pair(int w, int h, int diff, Frame& other) {
    Frame a = Frame::make(w, h, ColorTag::Gray, 100);
    other = Frame::make(w, h, ColorTag::Gray, static_cast<uint8_t>(100 + diff));
    return a;
}

RDCurve scaled_curve(const RDCurve& base, double factor) {
    RDCurve out = base;
    for (RDPoint& p : out.points) p.bitrate *= factor;
    return out;
}

RDCurve sample_curve() {
    // PSNR-like metric rising with rate.
    return RDCurve{{{100, 30.0}, {200, 33.5}, {400, 36.0}, {800, 38.0}}};
}

}  // namespace

TEST_CASE("psnr reference points") {
    Frame b;
    Frame a = uniform_diff_pair(16, 16, 0, b);
    CHECK(psnr(a, a) == 99.0);

    Frame black = Frame::make(16, 16, ColorTag::Gray, 0);
    Frame white = Frame::make(16, 16, ColorTag::Gray, 255);
    CHECK(psnr(black, white) == doctest::Approx(0.0).epsilon(1e-12));

    Frame c;
    Frame d = uniform_diff_pair(16, 16, 1, c);
    CHECK(psnr(d, c) == doctest::Approx(48.130803608679).epsilon(1e-9));

    Frame wrong = Frame::make(8, 8, ColorTag::Gray, 0);
    CHECK_THROWS_AS(psnr(a, wrong), ShapeError);
}

TEST_CASE("psnr strictly decreases as the uniform difference grows") {
    double prev = 1e9;
    for (int diff : {1, 2, 5, 10, 40}) {
        Frame b;
        Frame a = uniform_diff_pair(8, 8, diff, b);
        double v = psnr(a, b);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("ssim basics") {
    Frame f = testfix::head_frame_420(64, 64, 0.3);
    CHECK(ssim(f, f) == doctest::Approx(1.0).epsilon(1e-12));

    // Inverting a gradient image destroys the structure.
    Frame g = Frame::make(64, 64, ColorTag::Gray);
    Frame inv = g;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            uint8_t v = static_cast<uint8_t>(2 * x + 2 * y);
            g.at(0, y, x) = v;
            inv.at(0, y, x) = static_cast<uint8_t>(255 - v);
        }
    CHECK(ssim(g, inv) < 0.2);
    CHECK(ssim(g, inv) == doctest::Approx(ssim(inv, g)).epsilon(1e-12));
}

TEST_CASE("bd_rate of identical curves is exactly zero") {
    RDCurve c = sample_curve();
    CHECK(bd_rate(c, c, false) == 0.0);
    RDCurve three{{{100, 30.0}, {200, 33.0}, {400, 36.0}}};
    CHECK(bd_rate(three, three, false) == 0.0);
}

TEST_CASE("doubling or halving all rates lands on +100% / -50%") {
    RDCurve anchor = sample_curve();
    CHECK(bd_rate(anchor, scaled_curve(anchor, 2.0), false) == doctest::Approx(100.0).epsilon(0.001));
    CHECK(bd_rate(anchor, scaled_curve(anchor, 0.5), false) == doctest::Approx(-50.0).epsilon(0.002));

    // Same oracle through the piecewise fit (>= 5 points).
    RDCurve five{{{100, 30.0}, {180, 32.0}, {320, 34.1}, {560, 36.0}, {900, 37.5}}};
    CHECK(bd_rate(five, scaled_curve(five, 2.0), false) == doctest::Approx(100.0).epsilon(0.001));

    // Lower-is-better metrics integrate the same way.
    RDCurve lpips{{{100, 0.40}, {200, 0.31}, {400, 0.26}, {800, 0.22}}};
    CHECK(bd_rate(lpips, scaled_curve(lpips, 2.0), true) == doctest::Approx(100.0).epsilon(0.001));
}

TEST_CASE("bd_rate antisymmetry follows the rate-ratio reciprocal") {
    RDCurve a = sample_curve();
    RDCurve b{{{140, 30.5}, {260, 33.8}, {470, 36.2}, {940, 38.3}}};
    double ab = bd_rate(a, b, false);
    double ba = bd_rate(b, a, false);
    double reciprocal = -ba / (1.0 + ba / 100.0);
    CHECK(std::abs(ab - reciprocal) < 0.5);
}

TEST_CASE("bd_rate rejects degenerate inputs") {
    RDCurve a = sample_curve();
    RDCurve disjoint{{{100, 50.0}, {200, 52.0}, {400, 54.0}}};
    CHECK_THROWS_WITH_AS(bd_rate(a, disjoint, false), doctest::Contains("overlap"), ShapeError);

    RDCurve zigzag{{{100, 30.0}, {200, 29.0}, {400, 36.0}}};
    CHECK_THROWS_WITH_AS(bd_rate(a, zigzag, false), doctest::Contains("monotonic"), ShapeError);

    RDCurve too_short{{{100, 30.0}, {200, 33.0}}};
    CHECK_THROWS_AS(bd_rate(a, too_short, false), ShapeError);

    RDCurve unsorted{{{200, 33.0}, {100, 30.0}, {400, 36.0}}};
    CHECK_THROWS_AS(bd_rate(a, unsorted, false), ShapeError);
}

TEST_CASE("aligned embeddings give a positive confidence at shift zero") {
    Rng rng(61);
    std::vector<std::vector<double>> emb;
    for (int t = 0; t < 120; ++t) {
        std::vector<double> e(32);
        double norm = 0;
        for (double& v : e) {
            v = rng.normal(0, 1);
            norm += v * v;
        }
        for (double& v : e) v /= std::sqrt(norm);
        emb.push_back(e);
    }
    SyncConfidence sc = sync_confidence_embeddings(emb, emb, 15);
    CHECK(sc.best_shift == 0);
    CHECK(sc.confidence > 0.0);
}

TEST_CASE("independent random embeddings give near-zero confidence") {
    Rng rng(62);
    auto random_embeddings = [&](int n) {
        std::vector<std::vector<double>> emb;
        for (int t = 0; t < n; ++t) {
            std::vector<double> e(32);
            double norm = 0;
            for (double& v : e) {
                v = rng.normal(0, 1);
                norm += v * v;
            }
            for (double& v : e) v /= std::sqrt(norm);
            emb.push_back(e);
        }
        return emb;
    };
    SyncConfidence sc = sync_confidence_embeddings(random_embeddings(150),
                                                   random_embeddings(150), 15);
    CHECK(std::abs(sc.confidence) < 0.1);
}

TEST_CASE("delaying the video moves the peak shift accordingly") {
    Rng rng(63);
    std::vector<std::vector<double>> audio;
    for (int t = 0; t < 140; ++t) {
        std::vector<double> e(32);
        double norm = 0;
        for (double& v : e) {
            v = rng.normal(0, 1);
            norm += v * v;
        }
        for (double& v : e) v /= std::sqrt(norm);
        audio.push_back(e);
    }
    // Video delayed by 5 frames: mouth at t shows the audio of t-5, so the
    // audio must be shifted back to match (best_shift = -5).
    std::vector<std::vector<double>> mouth(audio.size(), std::vector<double>(32, 0.0));
    for (size_t t = 5; t < audio.size(); ++t) mouth[t] = audio[t - 5];
    for (size_t t = 0; t < 5; ++t) mouth[t] = audio[0];
    SyncConfidence sc = sync_confidence_embeddings(audio, mouth, 15);
    CHECK(sc.best_shift == -5);
    CHECK(sc.confidence > 0.0);
}

TEST_CASE("sync_confidence rejects too-short sequences") {
    std::vector<std::vector<double>> emb(10, std::vector<double>(8, 0.1));
    CHECK_THROWS_WITH_AS(sync_confidence_embeddings(emb, emb, 15), doctest::Contains("shorter"),
                         ShapeError);
}

TEST_CASE("sync confidence is invariant to a global audio gain") {
    // Audio well above the mel floor; gain 2 stays inside int16.
    NetConfig cfg;
    cfg.frame_w = 32;
    cfg.frame_h = 32;
    SyncScorer scorer = SyncScorer::make(cfg);
    AudioProjection aproj = AudioProjection::make(cfg);
    FrameSequence frames = testfix::head_sequence(41, 32, 32);

    AudioClip quiet;
    quiet.sample_rate = 16000;
    Rng rng(64);
    quiet.samples.resize(16000 * 2);
    for (auto& s : quiet.samples) s = clamp_i16(rng.normal(0, 3000.0));
    AudioClip loud = quiet;
    for (auto& s : loud.samples) s = clamp_i16(2.0 * s);

    SyncConfidence a = sync_confidence(frames, quiet, scorer, aproj, 15);
    SyncConfidence b = sync_confidence(frames, loud, scorer, aproj, 15);
    CHECK(a.best_shift == b.best_shift);
    CHECK(std::abs(a.confidence - b.confidence) < 1e-6);
}

TEST_CASE("rd_sweep emits one deterministic row per setting") {
    FrameSequence video = testfix::head_sequence(20, 32, 32);
    AudioClip audio = testfix::speech_audio(20.0 / 25.0, 16000);
    Config cfg;
    cfg.aux_qp = 40;
    std::vector<RdRow> rows = rd_sweep(video, audio, SweepAxis::GopSize, {5, 10}, cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].setting == "gop=5");
    CHECK(rows[1].setting == "gop=10");
    CHECK(rows[0].kbps_video > rows[1].kbps_video);

    std::vector<RdRow> again = rd_sweep(video, audio, SweepAxis::GopSize, {5, 10}, cfg);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].kbps_video == again[i].kbps_video);
        CHECK(rows[i].psnr == again[i].psnr);
        CHECK(rows[i].ssim == again[i].ssim);
        CHECK(rows[i].sync_confidence == again[i].sync_confidence);
    }
}

TEST_CASE("rd csv writer and curve reader cooperate") {
    std::vector<RdRow> rows{{"gop=15", 120.5, 180.25, 31.5, 0.92, 0.4},
                            {"gop=30", 90.25, 150.0, 30.75, 0.91, 0.35},
                            {"gop=60", 70.0, 130.0, 30.0, 0.90, 0.3}};
    std::string path = testfix::temp_path("rd.csv");
    write_rd_csv(rows, path, 1234);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# seed=1234");
    std::getline(in, line);
    CHECK(line == "setting,kbps_video,kbps_total,psnr,ssim,sync_confidence");

    // The sweep CSV's first three columns form a valid ingest curve once
    // bitrates ascend; write a curve file in the documented ingest format.
    std::string curve_path = testfix::temp_path("curve.csv");
    {
        std::ofstream out(curve_path);
        out << "setting,bitrate_kbps,metric\n";
        out << "gop=60,70.0,30.0\ngop=30,90.25,30.75\ngop=15,120.5,31.5\n";
    }
    RDCurve curve = read_rd_curve_csv(curve_path);
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[0].bitrate == doctest::Approx(70.0));
    CHECK(curve.points[2].value == doctest::Approx(31.5));

    std::string bad_path = testfix::temp_path("bad.csv");
    {
        std::ofstream out(bad_path);
        out << "setting,bitrate_kbps,metric\n";
        out << "a,100,30\n";
        out << "b,oops,31\n";
    }
    CHECK_THROWS_WITH_AS(read_rd_curve_csv(bad_path), doctest::Contains(":3"), FormatError);
}
