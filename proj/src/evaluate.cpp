#include "avth/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "avth/error.hpp"
#include "avth/media_io.hpp"
#include "avth/pipeline.hpp"

namespace avth {

using nn::Var;

// ---------------------------------------------------------------------------
// Pixel metrics

double psnr(const Frame& a, const Frame& b) {
    if (!a.same_geometry(b)) throw ShapeError("psnr: frame geometry differs");
    double sum = 0;
    size_t n = 0;
    for (int p = 0; p < a.plane_count(); ++p) {
        for (size_t i = 0; i < a.planes[p].size(); ++i) {
            double d = static_cast<double>(a.planes[p][i]) - b.planes[p][i];
            sum += d * d;
        }
        n += a.planes[p].size();
    }
    double mse = sum / static_cast<double>(n);
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double mean_psnr(const FrameSequence& a, const FrameSequence& b) {
    if (a.size() != b.size() || a.frames.empty()) throw ShapeError("mean_psnr: bad sequences");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += psnr(a.frames[i], b.frames[i]);
    return s / static_cast<double>(a.size());
}

double ssim(const Frame& a, const Frame& b) {
    if (!a.same_geometry(b)) throw ShapeError("ssim: frame geometry differs");
    constexpr int kWin = 8;
    constexpr double c1 = (0.01 * 255) * (0.01 * 255);
    constexpr double c2 = (0.03 * 255) * (0.03 * 255);
    int w = a.plane_width(0), h = a.plane_height(0);
    if (w < kWin || h < kWin) throw ShapeError("ssim: frame smaller than the 8x8 window");
    const auto& pa = a.planes[0];
    const auto& pb = b.planes[0];
    double total = 0;
    long count = 0;
    for (int y = 0; y + kWin <= h; ++y)
        for (int x = 0; x + kWin <= w; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = 0; dy < kWin; ++dy)
                for (int dx = 0; dx < kWin; ++dx) {
                    double va = pa[static_cast<size_t>(y + dy) * w + x + dx];
                    double vb = pb[static_cast<size_t>(y + dy) * w + x + dx];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            constexpr double n = kWin * kWin;
            double mua = sa / n, mub = sb / n;
            double vara = saa / n - mua * mua;
            double varb = sbb / n - mub * mub;
            double cov = sab / n - mua * mub;
            total += ((2 * mua * mub + c1) * (2 * cov + c2)) /
                     ((mua * mua + mub * mub + c1) * (vara + varb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

double mean_ssim(const FrameSequence& a, const FrameSequence& b) {
    if (a.size() != b.size() || a.frames.empty()) throw ShapeError("mean_ssim: bad sequences");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += ssim(a.frames[i], b.frames[i]);
    return s / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// BD-rate

void RDCurve::validate() const {
    if (points.size() < 3) throw ShapeError("RD curve needs at least 3 points");
    for (size_t i = 1; i < points.size(); ++i)
        if (!(points[i].bitrate > points[i - 1].bitrate))
            throw ShapeError("RD curve bitrates must be strictly increasing");
    for (const RDPoint& p : points)
        if (!(p.bitrate > 0)) throw ShapeError("RD curve bitrates must be positive");
}

namespace {

// log10(rate) as a function of the metric. Polynomial fit through up to four
// points, monotone piecewise cubic (PCHIP) beyond that.
struct RateFit {
    bool piecewise = false;
    std::vector<double> coeff;           // polynomial in (m - shift)
    double shift = 0;
    std::vector<double> x, y, slope;     // pchip knots

    double integral(double lo, double hi) const;
};

std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y,
                            int degree) {
    int terms = degree + 1;
    std::vector<double> ata(static_cast<size_t>(terms) * terms, 0.0);
    std::vector<double> atb(terms, 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        std::vector<double> pw(terms, 1.0);
        for (int t = 1; t < terms; ++t) pw[t] = pw[t - 1] * x[i];
        for (int r = 0; r < terms; ++r) {
            atb[r] += pw[r] * y[i];
            for (int c = 0; c < terms; ++c) ata[static_cast<size_t>(r) * terms + c] += pw[r] * pw[c];
        }
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < terms; ++col) {
        int piv = col;
        for (int r = col + 1; r < terms; ++r)
            if (std::abs(ata[static_cast<size_t>(r) * terms + col]) >
                std::abs(ata[static_cast<size_t>(piv) * terms + col]))
                piv = r;
        if (std::abs(ata[static_cast<size_t>(piv) * terms + col]) < 1e-14)
            throw ShapeError("degenerate RD curve: singular polynomial fit");
        if (piv != col) {
            for (int c = 0; c < terms; ++c)
                std::swap(ata[static_cast<size_t>(piv) * terms + c],
                          ata[static_cast<size_t>(col) * terms + c]);
            std::swap(atb[piv], atb[col]);
        }
        for (int r = col + 1; r < terms; ++r) {
            double f = ata[static_cast<size_t>(r) * terms + col] /
                       ata[static_cast<size_t>(col) * terms + col];
            for (int c = col; c < terms; ++c)
                ata[static_cast<size_t>(r) * terms + c] -=
                    f * ata[static_cast<size_t>(col) * terms + c];
            atb[r] -= f * atb[col];
        }
    }
    std::vector<double> coeff(terms);
    for (int r = terms - 1; r >= 0; --r) {
        double s = atb[r];
        for (int c = r + 1; c < terms; ++c) s -= ata[static_cast<size_t>(r) * terms + c] * coeff[c];
        coeff[r] = s / ata[static_cast<size_t>(r) * terms + r];
    }
    return coeff;
}

std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    size_t n = x.size();
    std::vector<double> h(n - 1), delta(n - 1), m(n);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        delta[i] = (y[i + 1] - y[i]) / h[i];
    }
    for (size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0) {
            m[i] = 0;
        } else {
            double w1 = 2 * h[i] + h[i - 1];
            double w2 = h[i] + 2 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0) return 0.0;
        if (d0 * d1 <= 0 && std::abs(s) > 3 * std::abs(d0)) return 3 * d0;
        return s;
    };
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return m;
}

// Integral of the cubic Hermite segment between knots i and i+1 over
// [t0, t1] in local coordinates.
double hermite_integral(double yi, double yj, double mi, double mj, double h, double t0,
                        double t1) {
    auto h00 = [](double t) { return 0.5 * t * t * t * t - t * t * t + t; };
    auto h10 = [](double t) { return 0.25 * t * t * t * t - 2.0 / 3.0 * t * t * t + 0.5 * t * t; };
    auto h01 = [](double t) { return -0.5 * t * t * t * t + t * t * t; };
    auto h11 = [](double t) { return 0.25 * t * t * t * t - t * t * t / 3.0; };
    return h * (yi * (h00(t1) - h00(t0)) + h * mi * (h10(t1) - h10(t0)) +
                yj * (h01(t1) - h01(t0)) + h * mj * (h11(t1) - h11(t0)));
}

double RateFit::integral(double lo, double hi) const {
    if (!piecewise) {
        // Antiderivative term by term: coeff[t] * (b^{t+1} - a^{t+1}) / (t+1).
        double a = lo - shift, b = hi - shift;
        double total = 0;
        double powa = a, powb = b;
        for (size_t t = 0; t < coeff.size(); ++t) {
            total += coeff[t] * (powb - powa) / static_cast<double>(t + 1);
            powa *= a;
            powb *= b;
        }
        return total;
    }
    double total = 0;
    for (size_t i = 0; i + 1 < x.size(); ++i) {
        double a = std::max(lo, x[i]), b = std::min(hi, x[i + 1]);
        if (b <= a) continue;
        double h = x[i + 1] - x[i];
        total += hermite_integral(y[i], y[i + 1], slope[i], slope[i + 1], h, (a - x[i]) / h,
                                  (b - x[i]) / h);
    }
    return total;
}

RateFit fit_log_rate(const RDCurve& curve, bool lower_is_better) {
    size_t n = curve.points.size();
    std::vector<double> metric(n), lograte(n);
    for (size_t i = 0; i < n; ++i) {
        metric[i] = curve.points[i].value;
        lograte[i] = std::log10(curve.points[i].bitrate);
    }
    // Metric must move monotonically with rate in the direction the
    // orientation implies.
    double range = 0;
    for (size_t i = 0; i < n; ++i)
        range = std::max(range, std::abs(metric[i] - metric[0]));
    double tol = 1e-9 * std::max(range, 1.0);
    for (size_t i = 1; i < n; ++i) {
        double d = metric[i] - metric[i - 1];
        if (lower_is_better ? d > tol : d < -tol)
            throw ShapeError("degenerate RD curve: metric is not monotonic in rate");
    }
    if (lower_is_better) {
        std::reverse(metric.begin(), metric.end());
        std::reverse(lograte.begin(), lograte.end());
    }
    // Guard against exactly duplicated metric values.
    for (size_t i = 1; i < n; ++i)
        if (!(metric[i] > metric[i - 1]))
            throw ShapeError("degenerate RD curve: duplicate metric values");

    RateFit fit;
    if (n <= 4) {
        double shift = 0;
        for (double m : metric) shift += m;
        shift /= static_cast<double>(n);
        std::vector<double> xs(n);
        for (size_t i = 0; i < n; ++i) xs[i] = metric[i] - shift;
        fit.piecewise = false;
        fit.shift = shift;
        fit.coeff = polyfit(xs, lograte, n == 3 ? 2 : 3);
    } else {
        fit.piecewise = true;
        fit.x = metric;
        fit.y = lograte;
        fit.slope = pchip_slopes(metric, lograte);
    }
    return fit;
}

}  // namespace

double bd_rate(const RDCurve& anchor, const RDCurve& test, bool lower_is_better) {
    anchor.validate();
    test.validate();
    RateFit fa = fit_log_rate(anchor, lower_is_better);
    RateFit ft = fit_log_rate(test, lower_is_better);

    auto metric_range = [&](const RDCurve& c) {
        double lo = c.points.front().value, hi = c.points.front().value;
        for (const RDPoint& p : c.points) {
            lo = std::min(lo, p.value);
            hi = std::max(hi, p.value);
        }
        return std::pair<double, double>(lo, hi);
    };
    auto [alo, ahi] = metric_range(anchor);
    auto [tlo, thi] = metric_range(test);
    double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
    if (!(hi > lo)) throw ShapeError("RD curves have no overlapping metric range");

    double delta = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    return (std::pow(10.0, delta) - 1.0) * 100.0;
}

// ---------------------------------------------------------------------------
// Sync confidence

SyncConfidence sync_confidence_embeddings(const std::vector<std::vector<double>>& audio_embed,
                                          const std::vector<std::vector<double>>& mouth_embed,
                                          int max_shift) {
    if (max_shift < 1) throw ConfigError("max_shift must be at least 1");
    if (audio_embed.size() != mouth_embed.size())
        throw ShapeError("embedding sequences must have equal length");
    long t = static_cast<long>(audio_embed.size());
    if (t < 2 * max_shift + 1)
        throw ShapeError("sequence shorter than 2*max_shift+1 frames");

    double best = -1e300, sum = 0;
    int best_shift = 0;
    for (int s = -max_shift; s <= max_shift; ++s) {
        double acc = 0;
        long count = 0;
        for (long i = 0; i < t; ++i) {
            long j = i + s;
            if (j < 0 || j >= t) continue;
            const auto& a = audio_embed[j];
            const auto& m = mouth_embed[i];
            double dotv = 0;
            for (size_t k = 0; k < a.size(); ++k) dotv += a[k] * m[k];
            acc += dotv;
            ++count;
        }
        double mean = acc / static_cast<double>(count);
        sum += mean;
        if (mean > best) {
            best = mean;
            best_shift = s;
        }
    }
    double avg = sum / static_cast<double>(2 * max_shift + 1);
    return {best - avg, best_shift};
}

SyncConfidence sync_confidence(const FrameSequence& frames, const AudioClip& clip,
                               const SyncScorer& scorer, const AudioProjection& aproj,
                               int max_shift) {
    if (frames.frames.empty()) throw ShapeError("sync_confidence over an empty sequence");
    AudioFeatureSequence feats = audio_encode(log_mel(resample_audio(clip, 16000)), aproj);
    std::vector<std::vector<double>> ae, me;
    for (size_t i = 0; i < frames.size(); ++i) {
        AudioWindow win = window_for_frame(feats, static_cast<int>(i));
        Var e = scorer.embed_audio(nn::constant(win.features));
        ae.push_back(e->val.v);

        Frame rgb = frames.frames[i].color == ColorTag::Rgb ? frames.frames[i]
                                                            : yuv_to_rgb(frames.frames[i]);
        int x0, y0, cw, ch;
        mouth_crop_rect(rgb.width, rgb.height, x0, y0, cw, ch);
        Var t = nn::constant(frame_to_tensor01(rgb));
        Var m = scorer.embed_mouth(nn::crop_hw(t, y0, x0, ch, cw));
        me.push_back(m->val.v);
    }
    return sync_confidence_embeddings(ae, me, max_shift);
}

// ---------------------------------------------------------------------------
// RD sweep

std::vector<RdRow> rd_sweep(const FrameSequence& video, const AudioClip& audio, SweepAxis axis,
                            const std::vector<int>& values, const Config& cfg) {
    if (values.empty()) throw ConfigError("sweep needs at least one setting");
    NetConfig nc = cfg.net_config(video.frames.at(0).width, video.frames.at(0).height);
    SyncScorer scorer = SyncScorer::make(nc);
    AudioProjection aproj = AudioProjection::make(nc);

    std::vector<RdRow> rows;
    for (int v : values) {
        Config c = cfg;
        if (axis == SweepAxis::GopSize) c.gop_size = v;
        else c.keyframe_qp = v;
        EncodeSummary summary;
        std::vector<uint8_t> bytes = encode_stream(video, audio, c, &summary);
        DecodeResult dec = decode_stream(bytes, c);

        RdRow row;
        row.setting = (axis == SweepAxis::GopSize ? "gop=" : "qp=") + std::to_string(v);
        row.kbps_video = summary.video_kbps;
        row.kbps_total = summary.total_kbps;
        row.psnr = mean_psnr(dec.video, video);
        row.ssim = mean_ssim(dec.video, video);
        int max_shift = std::min<int>(15, (static_cast<int>(video.size()) - 1) / 2);
        row.sync_confidence =
            max_shift >= 1
                ? sync_confidence(dec.video, audio, scorer, aproj, max_shift).confidence
                : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_rd_csv(const std::vector<RdRow>& rows, const std::string& path, uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "# seed=" << seed << "\n";
    out << "setting,kbps_video,kbps_total,psnr,ssim,sync_confidence\n";
    out.setf(std::ios::fixed);
    out.precision(6);
    for (const RdRow& r : rows)
        out << r.setting << ',' << r.kbps_video << ',' << r.kbps_total << ',' << r.psnr << ','
            << r.ssim << ',' << r.sync_confidence << '\n';
}

RDCurve read_rd_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    RDCurve curve;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string setting, rate_s, metric_s;
        if (!std::getline(ss, setting, ',') || !std::getline(ss, rate_s, ',') ||
            !std::getline(ss, metric_s))
            throw FormatError(path + ":" + std::to_string(lineno) +
                              ": expected setting,bitrate_kbps,metric");
        try {
            double rate = std::stod(rate_s);
            double metric = std::stod(metric_s);
            curve.points.push_back({rate, metric});
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header row
            throw FormatError(path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    curve.validate();
    return curve;
}

}  // namespace avth
