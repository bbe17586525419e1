#pragma once

#include <functional>
#include <string>
#include <vector>

#include "avth/frame.hpp"
#include "avth/lipsync.hpp"
#include "avth/nets.hpp"
#include "avth/util.hpp"

namespace avth {

struct LossWeights {
    double lambda_p = 0.01;
    double mu_sync = 0.03;
};

// P_sync maps the scorer's cosine similarity into a probability:
// clamp((s+1)/2, 1e-6, 1).
double sync_prob(double cosine);
double neg_log_sync_prob(double cosine);

// Mean over frames of mean absolute pixel error, pixels normalized to [0,1].
double loss_rec(const FrameSequence& recon, const FrameSequence& gt);

// Mean over frames of the L2 distance between extractor features.
double loss_perceptual(const FrameSequence& recon, const FrameSequence& gt,
                       const PerceptualNet& extractor);

// Mean over frames of -ln P_sync(cos(audio embed, mouth-crop embed)).
double loss_sync(const FrameSequence& recon, const std::vector<AudioWindow>& windows,
                 const SyncScorer& scorer);

double loss_total(double rec, double perceptual, double sync, const LossWeights& w);

// One (TR frame, ground truth, conditioning audio window) training triple.
struct TrainSample {
    Frame tr;
    Frame gt;
    AudioWindow window;
};

// Constant input tensors for a batch, reusable across steps.
struct Stage2Batch {
    std::vector<nn::Var> tr01, mask01, gt01, windows;
    static Stage2Batch from_samples(const std::vector<TrainSample>& samples);
};

struct LossTerms {
    nn::Var rec, perceptual, sync, total;
};

// Differentiable Stage-II forward + Eq. 3..6 objective over the batch.
LossTerms stage2_loss_graph(const Stage2Nets& nets, const Stage2Batch& batch,
                            const LossWeights& w, const PerceptualNet& extractor,
                            const SyncScorer& scorer);

// Central finite differences against backprop gradients on `samples` sampled
// parameter coordinates; returns the max relative error
// |g_fd - g| / max(|g_fd|, |g|, 1e-8).
double grad_check(const std::function<nn::Var()>& scalar_fn, const std::vector<nn::Var>& params,
                  int samples, double h, Rng& rng);

struct TraceRow {
    int step = 0;
    double rec = 0, perceptual = 0, sync = 0, total = 0;
};

// Plain full-batch gradient descent on Eq. 6 over the Stage-II nets. Returns
// the per-step loss trace; throws TrainingError naming the step if the loss
// goes non-finite.
std::vector<TraceRow> finetune(Stage2Nets& nets, const std::vector<TrainSample>& dataset,
                               int steps, double lr, const LossWeights& w,
                               const PerceptualNet& extractor, const SyncScorer& scorer);

// CSV with header step,rec,p,sync,total.
void write_loss_trace(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace avth
