#pragma once

#include <string>
#include <vector>

#include "avth/config.hpp"
#include "avth/frame.hpp"
#include "avth/lipsync.hpp"
#include "avth/nets.hpp"

namespace avth {

struct RDPoint {
    double bitrate = 0;  // kbps
    double value = 0;    // metric score
};

// At least three points, strictly increasing bitrate.
struct RDCurve {
    std::vector<RDPoint> points;
    void validate() const;
};

// 10*log10(255^2/MSE) over all planes; identical frames report the 99 dB cap.
double psnr(const Frame& a, const Frame& b);
double mean_psnr(const FrameSequence& a, const FrameSequence& b);

// Sliding 8x8 uniform-window SSIM on the luma (first) plane,
// C1=(0.01*255)^2, C2=(0.03*255)^2, mean over windows.
double ssim(const Frame& a, const Frame& b);
double mean_ssim(const FrameSequence& a, const FrameSequence& b);

// Bjontegaard delta rate: fit log10(rate) against the metric (cubic up to 4
// points, piecewise-cubic PCHIP from 5), integrate the difference over the
// overlapping metric interval; (10^delta - 1) * 100. Negative means the test
// curve saves bitrate.
double bd_rate(const RDCurve& anchor, const RDCurve& test, bool lower_is_better);

struct SyncConfidence {
    double confidence = 0;
    int best_shift = 0;  // audio-lead in frames; negative when video lags
};

// Core shifted-similarity analysis over per-frame unit embeddings: for each
// shift s, mean cosine of audio[t+s] with mouth[t]; confidence is the peak
// minus the mean over shifts. best_shift is the smallest s attaining the peak.
SyncConfidence sync_confidence_embeddings(const std::vector<std::vector<double>>& audio_embed,
                                          const std::vector<std::vector<double>>& mouth_embed,
                                          int max_shift);

// Full pipeline: audio windows and mouth crops are embedded with the scorer.
SyncConfidence sync_confidence(const FrameSequence& frames, const AudioClip& clip,
                               const SyncScorer& scorer, const AudioProjection& aproj,
                               int max_shift = 15);

struct RdRow {
    std::string setting;
    double kbps_video = 0;
    double kbps_total = 0;
    double psnr = 0;
    double ssim = 0;
    double sync_confidence = 0;
};

enum class SweepAxis { GopSize, KeyframeQp };

// Full encode+decode per setting; rows in the given setting order.
std::vector<RdRow> rd_sweep(const FrameSequence& video, const AudioClip& audio, SweepAxis axis,
                            const std::vector<int>& values, const Config& cfg);

void write_rd_csv(const std::vector<RdRow>& rows, const std::string& path, uint64_t seed);

// Ingest format for external metric curves: setting,bitrate_kbps,metric with
// an optional header line. Parse errors carry the line number.
RDCurve read_rd_curve_csv(const std::string& path);

}  // namespace avth
