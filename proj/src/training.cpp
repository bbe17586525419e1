#include "avth/training.hpp"

#include <cmath>
#include <fstream>

#include "avth/error.hpp"
#include "avth/media_io.hpp"

namespace avth {

using nn::Tensor;
using nn::Var;

double sync_prob(double cosine) {
    return std::clamp((cosine + 1.0) / 2.0, 1e-6, 1.0);
}

double neg_log_sync_prob(double cosine) { return -std::log(sync_prob(cosine)); }

namespace {

void check_pair(const FrameSequence& a, const FrameSequence& b) {
    if (a.size() != b.size()) throw ShapeError("sequence lengths differ");
    for (size_t i = 0; i < a.size(); ++i)
        if (!a.frames[i].same_geometry(b.frames[i]))
            throw ShapeError("frame geometry differs at index " + std::to_string(i));
}

Frame as_rgb(const Frame& f) { return f.color == ColorTag::Rgb ? f : yuv_to_rgb(f); }

Var mean_of(std::vector<Var> terms) {
    Var acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = nn::add(acc, terms[i]);
    return nn::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

// -ln P_sync of the cosine between two unit embeddings, on the graph.
Var sync_term(Var audio_embed, Var mouth_embed) {
    Var s = nn::dot(audio_embed, mouth_embed);
    Var p = nn::clamp_(nn::scale(nn::add_scalar(s, 1.0), 0.5), 1e-6, 1.0);
    return nn::scale(nn::log_(p), -1.0);
}

Var mouth_crop(Var frame01) {
    int h = frame01->val.shape[1], w = frame01->val.shape[2];
    int x0, y0, cw, ch;
    mouth_crop_rect(w, h, x0, y0, cw, ch);
    return nn::crop_hw(frame01, y0, x0, ch, cw);
}

}  // namespace

double loss_rec(const FrameSequence& recon, const FrameSequence& gt) {
    check_pair(recon, gt);
    if (recon.frames.empty()) throw ShapeError("loss_rec over empty sequences");
    double total = 0;
    for (size_t i = 0; i < recon.size(); ++i) {
        const Frame& a = recon.frames[i];
        const Frame& b = gt.frames[i];
        double sum = 0;
        size_t n = 0;
        for (int p = 0; p < a.plane_count(); ++p) {
            for (size_t j = 0; j < a.planes[p].size(); ++j)
                sum += std::abs(a.planes[p][j] / 255.0 - b.planes[p][j] / 255.0);
            n += a.planes[p].size();
        }
        total += sum / static_cast<double>(n);
    }
    return total / static_cast<double>(recon.size());
}

double loss_perceptual(const FrameSequence& recon, const FrameSequence& gt,
                       const PerceptualNet& extractor) {
    check_pair(recon, gt);
    if (recon.frames.empty()) throw ShapeError("loss_perceptual over empty sequences");
    double total = 0;
    for (size_t i = 0; i < recon.size(); ++i) {
        Var fr = extractor.fwd(nn::constant(frame_to_tensor01(as_rgb(recon.frames[i]))));
        Var fg = extractor.fwd(nn::constant(frame_to_tensor01(as_rgb(gt.frames[i]))));
        Var d = nn::sub(fr, fg);
        Var n = nn::sqrt_(nn::sum(nn::mul(d, d)));
        total += n->val[0];
    }
    return total / static_cast<double>(recon.size());
}

double loss_sync(const FrameSequence& recon, const std::vector<AudioWindow>& windows,
                 const SyncScorer& scorer) {
    if (recon.size() != windows.size())
        throw ShapeError("loss_sync: frame and window counts differ");
    if (recon.frames.empty()) throw ShapeError("loss_sync over empty sequences");
    double total = 0;
    for (size_t i = 0; i < recon.size(); ++i) {
        Var frame01 = nn::constant(frame_to_tensor01(as_rgb(recon.frames[i])));
        Var em = scorer.embed_mouth(mouth_crop(frame01));
        Var ea = scorer.embed_audio(nn::constant(windows[i].features));
        total += sync_term(ea, em)->val[0];
    }
    return total / static_cast<double>(recon.size());
}

double loss_total(double rec, double perceptual, double sync, const LossWeights& w) {
    if (!std::isfinite(rec) || !std::isfinite(perceptual) || !std::isfinite(sync))
        throw TrainingError("loss_total given non-finite inputs");
    return rec + w.lambda_p * perceptual + w.mu_sync * sync;
}

// ---------------------------------------------------------------------------

Stage2Batch Stage2Batch::from_samples(const std::vector<TrainSample>& samples) {
    if (samples.empty()) throw ShapeError("empty training batch");
    Stage2Batch b;
    for (const TrainSample& s : samples) {
        Frame tr = as_rgb(s.tr);
        b.tr01.push_back(nn::constant(frame_to_tensor01(tr)));
        b.mask01.push_back(nn::constant(frame_to_tensor01(mask_lower_half(tr))));
        b.gt01.push_back(nn::constant(frame_to_tensor01(as_rgb(s.gt))));
        b.windows.push_back(nn::constant(s.window.features));
    }
    return b;
}

LossTerms stage2_loss_graph(const Stage2Nets& nets, const Stage2Batch& batch,
                            const LossWeights& w, const PerceptualNet& extractor,
                            const SyncScorer& scorer) {
    size_t n = batch.tr01.size();
    std::vector<Var> recs, percs, syncs;
    for (size_t i = 0; i < n; ++i) {
        Var v_ref = nets.enc.fwd(batch.tr01[i]);
        Var v_mask = nets.enc.fwd(batch.mask01[i]);
        Var fused = nets.unet.fwd(v_ref, v_mask, batch.windows[i]);
        Var recon01 = nets.dec.fwd(fused);

        recs.push_back(nn::mean(nn::abs_(nn::sub(recon01, batch.gt01[i]))));

        Var fr = extractor.fwd(recon01);
        Var fg = extractor.fwd(batch.gt01[i]);
        Var d = nn::sub(fr, fg);
        percs.push_back(nn::sqrt_(nn::sum(nn::mul(d, d))));

        Var em = scorer.embed_mouth(mouth_crop(recon01));
        Var ea = scorer.embed_audio(batch.windows[i]);
        syncs.push_back(sync_term(ea, em));
    }
    LossTerms t;
    t.rec = mean_of(std::move(recs));
    t.perceptual = mean_of(std::move(percs));
    t.sync = mean_of(std::move(syncs));
    t.total = nn::add(t.rec, nn::add(nn::scale(t.perceptual, w.lambda_p),
                                     nn::scale(t.sync, w.mu_sync)));
    return t;
}

double grad_check(const std::function<Var()>& scalar_fn, const std::vector<Var>& params,
                  int samples, double h, Rng& rng) {
    if (!(h > 0)) throw ConfigError("grad_check step must be positive");
    Var root = scalar_fn();
    if (!std::isfinite(root->val[0])) throw TrainingError("grad_check: non-finite function value");
    for (const Var& p : params) zero_grad(p);
    nn::backward(root);

    double worst = 0;
    for (int s = 0; s < samples; ++s) {
        size_t pi = rng.below(params.size());
        const Var& p = params[pi];
        size_t ci = rng.below(p->val.size());
        double analytic = p->grad.v.empty() ? 0.0 : p->grad[ci];

        double saved = p->val[ci];
        p->val[ci] = saved + h;
        double fp = scalar_fn()->val[0];
        p->val[ci] = saved - h;
        double fm = scalar_fn()->val[0];
        p->val[ci] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw TrainingError("grad_check: non-finite function value");
        double fd = (fp - fm) / (2.0 * h);
        double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8});
        worst = std::max(worst, rel);
    }
    for (const Var& p : params) zero_grad(p);
    return worst;
}

std::vector<TraceRow> finetune(Stage2Nets& nets, const std::vector<TrainSample>& dataset,
                               int steps, double lr, const LossWeights& w,
                               const PerceptualNet& extractor, const SyncScorer& scorer) {
    if (dataset.empty()) throw ShapeError("finetune needs a nonempty dataset");
    if (lr < 0) throw ConfigError("learning rate must be nonnegative");
    Stage2Batch batch = Stage2Batch::from_samples(dataset);
    std::vector<Var> params = nets.trainable_params();
    std::vector<TraceRow> trace;
    trace.reserve(steps);
    for (int step = 0; step < steps; ++step) {
        LossTerms t = stage2_loss_graph(nets, batch, w, extractor, scorer);
        TraceRow row{step, t.rec->val[0], t.perceptual->val[0], t.sync->val[0], t.total->val[0]};
        if (!std::isfinite(row.total))
            throw TrainingError("loss diverged (non-finite) at step " + std::to_string(step));
        trace.push_back(row);
        if (lr > 0) {
            nn::backward(t.total);
            for (const Var& p : params) {
                if (!p->grad.v.empty())
                    for (size_t i = 0; i < p->val.size(); ++i) p->val[i] -= lr * p->grad[i];
                zero_grad(p);
            }
        }
    }
    return trace;
}

void write_loss_trace(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "step,rec,p,sync,total\n";
    for (const TraceRow& r : trace)
        out << r.step << ',' << r.rec << ',' << r.perceptual << ',' << r.sync << ','
            << r.total << '\n';
}

}  // namespace avth
