#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "avth/animator.hpp"
#include "avth/basecodec.hpp"
#include "avth/cli.hpp"
#include "avth/container.hpp"
#include "avth/error.hpp"
#include "avth/evaluate.hpp"
#include "avth/gop.hpp"
#include "avth/lipsync.hpp"
#include "avth/media_io.hpp"
#include "avth/motion.hpp"
#include "avth/pipeline.hpp"
#include "avth/training.hpp"

namespace py = pybind11;
using namespace avth;

namespace {

Mat3 to_mat3(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2 || arr.shape(0) != 3 || arr.shape(1) != 3)
        throw ShapeError("rotation must be a 3x3 array");
    Mat3 m;
    std::copy(arr.data(), arr.data() + 9, m.m.begin());
    return m;
}

std::vector<Vec3> to_rows(py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                          const char* what) {
    if (arr.ndim() != 2 || arr.shape(1) != 3)
        throw ShapeError(std::string(what) + " must be a [K,3] array");
    std::vector<Vec3> out(arr.shape(0));
    const double* p = arr.data();
    for (ssize_t i = 0; i < arr.shape(0); ++i) out[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    return out;
}

py::array_t<double> from_rows(const std::vector<Vec3>& rows) {
    py::array_t<double> out({static_cast<ssize_t>(rows.size()), static_cast<ssize_t>(3)});
    double* p = out.mutable_data();
    for (size_t i = 0; i < rows.size(); ++i) {
        p[3 * i] = rows[i].x;
        p[3 * i + 1] = rows[i].y;
        p[3 * i + 2] = rows[i].z;
    }
    return out;
}

MotionParams to_motion(double scale, py::array_t<double> rotation, py::array_t<double> expression,
                       py::array_t<double> translation) {
    MotionParams p;
    p.scale = scale;
    p.rotation = to_mat3(rotation);
    p.expression = to_rows(expression, "expression");
    auto t = translation.unchecked<1>();
    if (t.shape(0) != 3) throw ShapeError("translation must have 3 entries");
    p.translation = {t(0), t(1), t(2)};
    return p;
}

AudioClip to_clip(py::array_t<int16_t, py::array::c_style | py::array::forcecast> samples,
                  int rate) {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.assign(samples.data(), samples.data() + samples.size());
    return clip;
}

Frame gray_frame(py::array_t<uint8_t, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2) throw ShapeError("expected a 2-D uint8 array");
    Frame f = Frame::make(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)),
                          ColorTag::Gray);
    std::copy(arr.data(), arr.data() + arr.size(), f.planes[0].begin());
    return f;
}

RDCurve to_curve(const std::vector<std::pair<double, double>>& points) {
    RDCurve c;
    for (auto [rate, value] : points) c.points.push_back({rate, value});
    return c;
}

}  // namespace

PYBIND11_MODULE(_avth, m) {
    m.doc() = "audio-visual talking-head codec core";

    py::register_exception<Error>(m, "AvthError");

    m.def("quant_step", &quant_step, py::arg("qp"));

    m.def(
        "partition",
        [](uint32_t total, uint32_t gop) {
            GopPlan plan = partition(total, gop);
            std::vector<std::pair<uint32_t, std::vector<uint32_t>>> out;
            for (const GopGroup& g : plan.groups) out.push_back({g.keyframe_index, g.target_indices});
            return out;
        },
        py::arg("total_frames"), py::arg("gop_size"));

    m.def(
        "rotation_from_euler",
        [](double pitch, double yaw, double roll) {
            Mat3 r = rotation_from_euler(pitch, yaw, roll);
            py::array_t<double> out({static_cast<ssize_t>(3), static_cast<ssize_t>(3)});
            std::copy(r.m.begin(), r.m.end(), out.mutable_data());
            return out;
        },
        py::arg("pitch"), py::arg("yaw"), py::arg("roll"));

    m.def(
        "compose_key",
        [](py::array_t<double> canonical, double scale, py::array_t<double> rotation,
           py::array_t<double> expression, py::array_t<double> translation) {
            CanonicalKeypoints xc{to_rows(canonical, "canonical")};
            return from_rows(
                compose_key(xc, to_motion(scale, rotation, expression, translation)).points);
        },
        py::arg("canonical"), py::arg("scale"), py::arg("rotation"), py::arg("expression"),
        py::arg("translation"));

    m.def(
        "compose_target",
        [](py::array_t<double> canonical, py::tuple key, py::tuple ref, py::tuple target,
           py::array_t<double> mouth) {
            auto unpack = [](py::tuple t) {
                return to_motion(t[0].cast<double>(), t[1].cast<py::array_t<double>>(),
                                 t[2].cast<py::array_t<double>>(),
                                 t[3].cast<py::array_t<double>>());
            };
            CanonicalKeypoints xc{to_rows(canonical, "canonical")};
            MouthOffset off{to_rows(mouth, "mouth")};
            return from_rows(
                compose_target(xc, unpack(key), unpack(ref), unpack(target), off).points);
        },
        py::arg("canonical"), py::arg("key"), py::arg("ref"), py::arg("target"), py::arg("mouth"),
        "Motion params are (scale, rotation[3,3], expression[K,3], translation[3]) tuples.");

    m.def(
        "mouth_retarget",
        [](py::array_t<double> keypoints, std::vector<int> indices,
           py::array_t<double> closed_template, double alpha) {
            KeypointSet x{to_rows(keypoints, "keypoints")};
            return from_rows(
                mouth_retarget(x, indices, to_rows(closed_template, "template"), alpha).offsets);
        },
        py::arg("keypoints"), py::arg("mouth_indices"), py::arg("closed_template"),
        py::arg("alpha"));

    m.def("canonical_face_template",
          [](int k) { return from_rows(canonical_face_template(k).points); }, py::arg("k"));
    m.def("default_mouth_indices", &default_mouth_indices, py::arg("k"));

    m.def(
        "warp",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> volume,
           py::array_t<double> x_key, py::array_t<double> x_trg, double sigma) {
            if (volume.ndim() != 4) throw ShapeError("volume must be [C,D,H,W]");
            FeatureVolume vol{nn::Tensor::from(
                {static_cast<int>(volume.shape(0)), static_cast<int>(volume.shape(1)),
                 static_cast<int>(volume.shape(2)), static_cast<int>(volume.shape(3))},
                std::vector<double>(volume.data(), volume.data() + volume.size()))};
            KeypointSet key{to_rows(x_key, "x_key")}, trg{to_rows(x_trg, "x_trg")};
            FeatureVolume out = warp(vol, key, trg, sigma);
            py::array_t<double> res({volume.shape(0), volume.shape(1), volume.shape(2),
                                     volume.shape(3)});
            std::copy(out.data.v.begin(), out.data.v.end(), res.mutable_data());
            return res;
        },
        py::arg("volume"), py::arg("x_key"), py::arg("x_trg"), py::arg("sigma") = 0.3);

    m.def(
        "resample_audio",
        [](py::array_t<int16_t> samples, int rate, int target) {
            AudioClip out = resample_audio(to_clip(samples, rate), target);
            py::array_t<int16_t> res(static_cast<ssize_t>(out.samples.size()));
            std::copy(out.samples.begin(), out.samples.end(), res.mutable_data());
            return res;
        },
        py::arg("samples"), py::arg("rate"), py::arg("target") = 16000);

    m.def(
        "log_mel",
        [](py::array_t<int16_t> samples, int rate) {
            MelSpectrogram mel = log_mel(to_clip(samples, rate));
            py::array_t<double> res({static_cast<ssize_t>(mel.count()), static_cast<ssize_t>(80)});
            std::copy(mel.frames.v.begin(), mel.frames.v.end(), res.mutable_data());
            return res;
        },
        py::arg("samples"), py::arg("rate") = 16000);

    m.def("window_indices",
          [](long i) { return window_indices_unclamped(i); }, py::arg("frame_index"),
          "Raw window indices 2i-4..2i+5 before clamping.");

    m.def(
        "psnr",
        [](py::array_t<uint8_t> a, py::array_t<uint8_t> b) {
            return psnr(gray_frame(a), gray_frame(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "ssim",
        [](py::array_t<uint8_t> a, py::array_t<uint8_t> b) {
            return ssim(gray_frame(a), gray_frame(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "bd_rate",
        [](const std::vector<std::pair<double, double>>& anchor,
           const std::vector<std::pair<double, double>>& test, bool lower_is_better) {
            return bd_rate(to_curve(anchor), to_curve(test), lower_is_better);
        },
        py::arg("anchor"), py::arg("test"), py::arg("lower_is_better") = false,
        "Curves are [(bitrate_kbps, metric), ...] with ascending bitrate.");

    m.def("sync_prob", &sync_prob, py::arg("cosine"));
    m.def("neg_log_sync_prob", &neg_log_sync_prob, py::arg("cosine"));
    m.def(
        "loss_total",
        [](double rec, double perceptual, double sync, double lambda_p, double mu_sync) {
            return loss_total(rec, perceptual, sync, LossWeights{lambda_p, mu_sync});
        },
        py::arg("rec"), py::arg("perceptual"), py::arg("sync"), py::arg("lambda_p") = 0.01,
        py::arg("mu_sync") = 0.03);

    m.def(
        "encode",
        [](const std::string& in_y4m, const std::string& in_wav, const std::string& out_avth,
           int gop_size, int keyframe_qp, int aux_qp, int downsample_factor, uint64_t seed) {
            Config cfg;
            cfg.gop_size = gop_size;
            cfg.keyframe_qp = keyframe_qp;
            cfg.aux_qp = aux_qp;
            cfg.downsample_factor = downsample_factor;
            cfg.seed = seed;
            FrameSequence video = read_y4m(in_y4m);
            AudioClip audio = read_wav(in_wav);
            EncodeSummary summary;
            std::vector<uint8_t> bytes = encode_stream(video, audio, cfg, &summary);
            std::ofstream out(out_avth, std::ios::binary);
            if (!out) throw FormatError("cannot write " + out_avth);
            out.write(reinterpret_cast<const char*>(bytes.data()),
                      static_cast<std::streamsize>(bytes.size()));
            py::dict d;
            d["total_bytes"] = summary.total_bytes;
            d["gop_count"] = summary.gop_count;
            d["video_kbps"] = summary.video_kbps;
            d["total_kbps"] = summary.total_kbps;
            return d;
        },
        py::arg("in_y4m"), py::arg("in_wav"), py::arg("out_avth"), py::arg("gop_size") = 30,
        py::arg("keyframe_qp") = 30, py::arg("aux_qp") = 40, py::arg("downsample_factor") = 4,
        py::arg("seed") = 1234);

    m.def(
        "decode",
        [](const std::string& in_avth, const std::string& out_y4m, uint64_t seed) {
            std::ifstream in(in_avth, std::ios::binary);
            if (!in) throw FormatError("cannot open " + in_avth);
            std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
            Config cfg;
            cfg.seed = seed;
            DecodeResult res = decode_stream(bytes, cfg);
            write_y4m(res.video, out_y4m);
            return res.video.size();
        },
        py::arg("in_avth"), py::arg("out_y4m"), py::arg("seed") = 1234);

    m.attr("__version__") = "0.1.0";
}
