#include "avth/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "avth/container.hpp"
#include "avth/error.hpp"
#include "avth/evaluate.hpp"
#include "avth/media_io.hpp"
#include "avth/pipeline.hpp"

namespace avth::cli {

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value pairs
    Config resolve() const {
        Config cfg = config_path.empty() ? Config{} : Config::from_file(config_path);
        for (const std::string& kv : overrides) {
            size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "flat key=value config file");
    cmd->add_option("--set", opts.overrides, "override a config key (key=value)")
        ->take_all();
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": expected a comma-separated integer list");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

void save_bytes(const std::vector<uint8_t>& bytes, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<uint8_t> load_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

int run_encode(const std::string& in_video, const std::string& in_audio,
               const std::string& out_path, const Config& cfg, int gop_override,
               std::ostream& out) {
    if (in_audio.empty()) throw ConfigError("audio required (pass in.wav)");
    Config c = cfg;
    if (gop_override > 0) c.gop_size = gop_override;
    FrameSequence video = read_y4m(in_video);
    AudioClip audio = read_wav(in_audio);
    if (QpConfig{c.keyframe_qp, c.aux_qp, c.downsample_factor}.aux_quality_exceeds_keyframe())
        out << "warning: aux_qp < keyframe_qp gives auxiliary frames the higher quality\n";
    EncodeSummary summary;
    std::vector<uint8_t> bytes = encode_stream(video, audio, c, &summary);
    save_bytes(bytes, out_path);
    out << "seed=" << c.seed << " gops=" << summary.gop_count
        << " bytes=" << summary.total_bytes << " video_kbps=" << summary.video_kbps
        << " total_kbps=" << summary.total_kbps << "\n";
    return 0;
}

int run_decode(const std::string& in_path, const std::string& out_video,
               const std::string& dump_tr, const std::string& dump_motion, const Config& cfg,
               std::ostream& out) {
    if (!dump_motion.empty()) std::filesystem::create_directories(dump_motion);
    DecodeResult res = decode_stream(load_bytes(in_path), cfg, !dump_tr.empty(), dump_motion);
    write_y4m(res.video, out_video);
    if (!dump_tr.empty()) {
        FrameSequence tr420;
        tr420.fps = res.tr_frames.fps;
        for (const Frame& f : res.tr_frames.frames) tr420.frames.push_back(rgb_to_yuv(f));
        write_y4m(tr420, dump_tr);
        out << "tr_frames=" << tr420.size() << "\n";
    }
    out << "seed=" << cfg.seed << " frames=" << res.video.size() << "\n";
    return 0;
}

int run_metrics(const std::string& ref_path, const std::string& test_path,
                const std::string& audio_path, const std::string& csv_path, const Config& cfg,
                std::ostream& out) {
    FrameSequence ref = read_y4m(ref_path);
    FrameSequence test = read_y4m(test_path);
    double p = mean_psnr(test, ref);
    double s = mean_ssim(test, ref);
    out << "psnr=" << p << " ssim=" << s;
    double sync = 0;
    bool have_sync = false;
    if (!audio_path.empty()) {
        AudioClip audio = read_wav(audio_path);
        NetConfig nc = cfg.net_config(test.frames.at(0).width, test.frames.at(0).height);
        int max_shift = std::min<int>(15, (static_cast<int>(test.size()) - 1) / 2);
        if (max_shift >= 1) {
            SyncConfidence sc = sync_confidence(test, audio, SyncScorer::make(nc),
                                                AudioProjection::make(nc), max_shift);
            sync = sc.confidence;
            have_sync = true;
            out << " sync_confidence=" << sc.confidence << " best_shift=" << sc.best_shift;
        }
    }
    out << "\n";
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw FormatError("cannot write " + csv_path);
        csv << "# seed=" << cfg.seed << "\npsnr,ssim,sync_confidence\n"
            << p << ',' << s << ',' << (have_sync ? std::to_string(sync) : "") << "\n";
    }
    return 0;
}

int run_bdrate(const std::string& anchor_path, const std::string& test_path,
               bool lower_is_better, std::ostream& out) {
    RDCurve anchor = read_rd_curve_csv(anchor_path);
    RDCurve test = read_rd_curve_csv(test_path);
    double pct = bd_rate(anchor, test, lower_is_better);
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "bd_rate_percent=" << pct << "\n";
    return 0;
}

int run_sweep(const std::string& in_video, const std::string& in_audio,
              const std::string& out_csv, const std::string& gops, const std::string& qps,
              const Config& cfg, std::ostream& out) {
    if (in_audio.empty()) throw ConfigError("audio required (pass in.wav)");
    if (gops.empty() == qps.empty())
        throw ConfigError("pass exactly one of --gops or --qps");
    FrameSequence video = read_y4m(in_video);
    AudioClip audio = read_wav(in_audio);
    SweepAxis axis = gops.empty() ? SweepAxis::KeyframeQp : SweepAxis::GopSize;
    std::vector<int> values =
        parse_int_list(gops.empty() ? qps : gops, gops.empty() ? "--qps" : "--gops");
    std::vector<RdRow> rows = rd_sweep(video, audio, axis, values, cfg);
    write_rd_csv(rows, out_csv, cfg.seed);
    out << "rows=" << rows.size() << " csv=" << out_csv << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"audio-visual talking-head codec"};
    app.require_subcommand(1);

    CommonOpts enc_common, dec_common, met_common, swp_common;

    auto* enc = app.add_subcommand("encode", "encode Y4M + WAV into an .avth stream");
    std::vector<std::string> enc_files;
    int enc_gop = 0;
    enc->add_option("files", enc_files, "in.y4m in.wav out.avth")
        ->expected(2, 3)
        ->required();
    enc->add_option("--gop", enc_gop, "GOP size override");
    add_common(enc, enc_common);

    auto* dec = app.add_subcommand("decode", "decode an .avth stream to Y4M");
    std::string dec_in, dec_out, dec_tr, dec_motion;
    dec->add_option("input", dec_in, "input .avth")->required();
    dec->add_option("output", dec_out, "output .y4m")->required();
    dec->add_option("--dump-tr", dec_tr, "also write Stage-I TR frames to this .y4m");
    dec->add_option("--dump-motion", dec_motion,
                    "write per-GOP keypoint sidecars (f32) into this directory");
    add_common(dec, dec_common);

    auto* met = app.add_subcommand("metrics", "PSNR/SSIM (and sync confidence with --audio)");
    std::string met_ref, met_test, met_wav, met_csv;
    met->add_option("reference", met_ref, "reference .y4m")->required();
    met->add_option("test", met_test, "test .y4m")->required();
    met->add_option("--audio", met_wav, "original .wav for sync confidence");
    met->add_option("--csv", met_csv, "also write a CSV row");
    add_common(met, met_common);

    auto* bdr = app.add_subcommand("bdrate", "BD-rate between two RD curve CSVs");
    std::string bd_anchor, bd_test;
    bool bd_lower = false;
    bdr->add_option("anchor", bd_anchor, "anchor curve CSV")->required();
    bdr->add_option("test", bd_test, "test curve CSV")->required();
    bdr->add_flag("--lower-is-better", bd_lower, "metric improves downward (e.g. LPIPS)");

    auto* swp = app.add_subcommand("sweep", "RD sweep over GOP sizes or keyframe QPs");
    std::vector<std::string> swp_files;
    std::string swp_gops, swp_qps;
    swp->add_option("files", swp_files, "in.y4m in.wav out.csv")
        ->expected(2, 3)
        ->required();
    swp->add_option("--gops", swp_gops, "comma-separated GOP sizes");
    swp->add_option("--qps", swp_qps, "comma-separated keyframe QPs");
    add_common(swp, swp_common);

    std::vector<const char*> argv;
    argv.push_back("avth");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) {  // --help
                out << app.help();
                return 0;
            }
            err << "error: " << e.what() << "\n";
            return 1;
        }
        // Two positionals mean the wav was omitted: (input, output).
        auto split_files = [](const std::vector<std::string>& files, std::string& in,
                              std::string& wav, std::string& dst) {
            in = files[0];
            wav = files.size() == 3 ? files[1] : "";
            dst = files.back();
        };
        if (enc->parsed()) {
            std::string in, wav, dst;
            split_files(enc_files, in, wav, dst);
            return run_encode(in, wav, dst, enc_common.resolve(), enc_gop, out);
        }
        if (dec->parsed())
            return run_decode(dec_in, dec_out, dec_tr, dec_motion, dec_common.resolve(), out);
        if (met->parsed())
            return run_metrics(met_ref, met_test, met_wav, met_csv, met_common.resolve(), out);
        if (bdr->parsed()) return run_bdrate(bd_anchor, bd_test, bd_lower, out);
        if (swp->parsed()) {
            std::string in, wav, dst;
            split_files(swp_files, in, wav, dst);
            return run_sweep(in, wav, dst, swp_gops, swp_qps, swp_common.resolve(), out);
        }
        err << "error: no subcommand\n";
        return 1;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ProcessError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace avth::cli
