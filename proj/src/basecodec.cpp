#include "avth/basecodec.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "avth/bitio.hpp"
#include "avth/error.hpp"
#include "avth/media_io.hpp"
#include "avth/util.hpp"

namespace avth {

namespace {

constexpr int kBlock = 8;

// Orthonormal 8-point DCT-II basis, C[u][n].
const std::array<std::array<double, 8>, 8>& dct_basis() {
    static const auto basis = [] {
        std::array<std::array<double, 8>, 8> c{};
        for (int u = 0; u < 8; ++u) {
            double s = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n)
                c[u][n] = s * std::cos((2 * n + 1) * u * M_PI / 16.0);
        }
        return c;
    }();
    return basis;
}

const std::array<int, 64>& zigzag() {
    static const auto order = [] {
        std::array<int, 64> z{};
        int idx = 0;
        for (int s = 0; s < 15; ++s) {
            if (s % 2 == 0) {  // walk up-right
                for (int y = std::min(s, 7); y >= std::max(0, s - 7); --y) z[idx++] = y * 8 + (s - y);
            } else {
                for (int y = std::max(0, s - 7); y <= std::min(s, 7); ++y) z[idx++] = y * 8 + (s - y);
            }
        }
        return z;
    }();
    return order;
}

int padded(int n) { return (n + kBlock - 1) / kBlock * kBlock; }

// Plane with replicate padding, level-shifted to be centered on zero.
std::vector<double> pad_plane(const std::vector<uint8_t>& src, int w, int h, int pw, int ph) {
    std::vector<double> out(static_cast<size_t>(pw) * ph);
    for (int y = 0; y < ph; ++y) {
        int sy = std::min(y, h - 1);
        for (int x = 0; x < pw; ++x) {
            int sx = std::min(x, w - 1);
            out[static_cast<size_t>(y) * pw + x] =
                static_cast<double>(src[static_cast<size_t>(sy) * w + sx]) - 128.0;
        }
    }
    return out;
}

void fdct8x8(const double* in, int stride, double* out) {
    const auto& c = dct_basis();
    double tmp[64];
    for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int x = 0; x < 8; ++x) s += in[y * stride + x] * c[u][x];
            tmp[y * 8 + u] = s;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int y = 0; y < 8; ++y) s += tmp[y * 8 + u] * c[v][y];
            out[v * 8 + u] = s;
        }
}

void idct8x8(const double* in, double* out, int stride) {
    const auto& c = dct_basis();
    double tmp[64];
    for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += in[v * 8 + u] * c[u][x];
            tmp[v * 8 + x] = s;
        }
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double s = 0;
            for (int v = 0; v < 8; ++v) s += tmp[v * 8 + x] * c[v][y];
            out[y * stride + x] = s;
        }
}

// Per block: ue(nonzero count), then per nonzero coefficient ue(zero run
// before it) and se(level). An all-zero block costs a single bit.
void encode_block(const double* block, int stride, double step, BitWriter& bw) {
    double coef[64];
    fdct8x8(block, stride, coef);
    const auto& zz = zigzag();
    int64_t q[64];
    int nonzero = 0;
    for (int i = 0; i < 64; ++i) {
        q[i] = iround(coef[zz[i]] / step);
        if (q[i] != 0) ++nonzero;
    }
    bw.put_ue(static_cast<uint64_t>(nonzero));
    int run = 0;
    for (int i = 0; i < 64; ++i) {
        if (q[i] == 0) {
            ++run;
        } else {
            bw.put_ue(static_cast<uint64_t>(run));
            bw.put_se(q[i]);
            run = 0;
        }
    }
}

void decode_block(BitReader& br, double step, double* out, int stride) {
    int64_t q[64] = {};
    uint64_t nonzero = br.get_ue();
    if (nonzero > 64) throw CodecError("nonzero coefficient count exceeds block size");
    int pos = 0;
    for (uint64_t n = 0; n < nonzero; ++n) {
        uint64_t run = br.get_ue();
        pos += static_cast<int>(run);
        if (pos >= 64) throw CodecError("coefficient run overflows block");
        int64_t level = br.get_se();
        if (level == 0) throw CodecError("zero level in coefficient stream");
        q[pos++] = level;
    }
    const auto& zz = zigzag();
    double coef[64];
    for (int i = 0; i < 64; ++i) coef[zz[i]] = static_cast<double>(q[i]) * step;
    idct8x8(coef, out, stride);
}

// Raw image the coefficient stream encodes (residuals included), 4:2:0.
Frame decode_chunk_image(const CodedChunk& chunk) {
    Frame frame = Frame::make(chunk.width, chunk.height, ColorTag::YCbCr420);
    double step = quant_step(chunk.qp);
    BitReader br(chunk.stream.data(), chunk.stream.size());
    for (int p = 0; p < frame.plane_count(); ++p) {
        int w = frame.plane_width(p), h = frame.plane_height(p);
        int pw = padded(w), ph = padded(h);
        std::vector<double> rec(static_cast<size_t>(pw) * ph);
        for (int by = 0; by < ph; by += kBlock)
            for (int bx = 0; bx < pw; bx += kBlock)
                decode_block(br, step, rec.data() + static_cast<size_t>(by) * pw + bx, pw);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                frame.at(p, y, x) = clamp_u8(rec[static_cast<size_t>(y) * pw + x] + 128.0);
    }
    return frame;
}

CodedChunk encode_frame_image(const Frame& frame, int qp, ChunkKind kind) {
    frame.validate();
    if (frame.color != ColorTag::YCbCr420) throw ShapeError("base codec expects 4:2:0 frames");
    double step = quant_step(qp);
    CodedChunk chunk;
    chunk.kind = kind;
    chunk.qp = qp;
    chunk.width = frame.width;
    chunk.height = frame.height;
    chunk.pad_right = padded(frame.width) - frame.width;
    chunk.pad_bottom = padded(frame.height) - frame.height;
    BitWriter bw;
    for (int p = 0; p < frame.plane_count(); ++p) {
        int w = frame.plane_width(p), h = frame.plane_height(p);
        int pw = padded(w), ph = padded(h);
        std::vector<double> plane = pad_plane(frame.planes[p], w, h, pw, ph);
        for (int by = 0; by < ph; by += kBlock)
            for (int bx = 0; bx < pw; bx += kBlock)
                encode_block(plane.data() + static_cast<size_t>(by) * pw + bx, pw, step, bw);
    }
    chunk.stream = bw.finish();
    return chunk;
}

}  // namespace

double quant_step(int qp) {
    if (qp < 0 || qp > 51) throw ConfigError("qp must be in [0, 51], got " + std::to_string(qp));
    return std::exp2((qp - 4) / 6.0);
}

std::vector<uint8_t> CodedChunk::serialize() const {
    std::vector<uint8_t> out;
    out.reserve(8 + stream.size());
    out.push_back(static_cast<uint8_t>(kind));
    out.push_back(static_cast<uint8_t>(qp));
    out.push_back(static_cast<uint8_t>(width & 0xff));
    out.push_back(static_cast<uint8_t>((width >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>(height & 0xff));
    out.push_back(static_cast<uint8_t>((height >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>(pad_right));
    out.push_back(static_cast<uint8_t>(pad_bottom));
    out.insert(out.end(), stream.begin(), stream.end());
    return out;
}

CodedChunk CodedChunk::parse(const uint8_t* data, size_t len) {
    if (len < 8) throw CodecError("chunk shorter than its 8-byte header");
    CodedChunk c;
    if (data[0] > 1) throw CodecError("unknown chunk kind " + std::to_string(data[0]));
    c.kind = static_cast<ChunkKind>(data[0]);
    c.qp = data[1];
    if (c.qp > 51) throw CodecError("chunk qp out of range");
    c.width = data[2] | (data[3] << 8);
    c.height = data[4] | (data[5] << 8);
    c.pad_right = data[6];
    c.pad_bottom = data[7];
    if (c.width <= 0 || c.height <= 0) throw CodecError("chunk has empty dimensions");
    c.stream.assign(data + 8, data + len);
    return c;
}

CodedChunk encode_intra(const Frame& frame, int qp) {
    return encode_frame_image(frame, qp, ChunkKind::Intra);
}

Frame decode_intra(const CodedChunk& chunk) {
    if (chunk.kind != ChunkKind::Intra) throw CodecError("decode_intra given a non-intra chunk");
    return decode_chunk_image(chunk);
}

std::vector<CodedChunk> encode_lowdelay(const FrameSequence& frames, int qp) {
    if (frames.frames.empty()) throw ShapeError("encode_lowdelay needs at least one frame");
    frames.validate();
    std::vector<CodedChunk> chunks;
    chunks.reserve(frames.size());
    chunks.push_back(encode_intra(frames.frames[0], qp));
    Frame prev = decode_chunk_image(chunks[0]);
    for (size_t k = 1; k < frames.size(); ++k) {
        const Frame& cur = frames.frames[k];
        if (!cur.same_geometry(prev)) throw ShapeError("low-delay frames must share geometry");
        Frame residual = Frame::make(cur.width, cur.height, ColorTag::YCbCr420);
        for (int p = 0; p < cur.plane_count(); ++p)
            for (size_t i = 0; i < cur.planes[p].size(); ++i)
                residual.planes[p][i] = clamp_u8(static_cast<double>(cur.planes[p][i]) -
                                                 prev.planes[p][i] + 128.0);
        chunks.push_back(encode_frame_image(residual, qp, ChunkKind::LowDelay));
        Frame dec = decode_chunk_image(chunks.back());
        for (int p = 0; p < prev.plane_count(); ++p)
            for (size_t i = 0; i < prev.planes[p].size(); ++i)
                prev.planes[p][i] = clamp_u8(static_cast<double>(dec.planes[p][i]) +
                                             prev.planes[p][i] - 128.0);
    }
    return chunks;
}

FrameSequence decode_lowdelay(const std::vector<CodedChunk>& chunks, Rational fps) {
    if (chunks.empty()) throw CodecError("decode_lowdelay given no chunks");
    if (chunks[0].kind != ChunkKind::Intra)
        throw CodecError("low-delay stream must start with an intra chunk");
    FrameSequence seq;
    seq.fps = fps;
    seq.frames.push_back(decode_chunk_image(chunks[0]));
    for (size_t k = 1; k < chunks.size(); ++k) {
        if (chunks[k].kind != ChunkKind::LowDelay)
            throw CodecError("unexpected intra chunk inside low-delay stream");
        Frame res = decode_chunk_image(chunks[k]);
        const Frame& prev = seq.frames.back();
        if (!res.same_geometry(prev)) throw CodecError("low-delay chunk geometry mismatch");
        Frame rec = Frame::make(res.width, res.height, ColorTag::YCbCr420);
        for (int p = 0; p < res.plane_count(); ++p)
            for (size_t i = 0; i < res.planes[p].size(); ++i)
                rec.planes[p][i] = clamp_u8(static_cast<double>(res.planes[p][i]) +
                                            prev.planes[p][i] - 128.0);
        seq.frames.push_back(std::move(rec));
    }
    return seq;
}

Frame downsample(const Frame& frame, int factor) {
    frame.validate();
    if (factor < 1) throw ConfigError("downsample factor must be >= 1");
    if (factor == 1) return frame;
    for (int p = 0; p < frame.plane_count(); ++p)
        if (frame.plane_width(p) % factor || frame.plane_height(p) % factor)
            throw ShapeError("plane dimensions not divisible by downsample factor");
    Frame out = Frame::make(frame.width / factor, frame.height / factor, frame.color);
    for (int p = 0; p < frame.plane_count(); ++p) {
        int sw = frame.plane_width(p);
        int ow = out.plane_width(p), oh = out.plane_height(p);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double sum = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        sum += frame.planes[p][static_cast<size_t>(y * factor + dy) * sw +
                                               (x * factor + dx)];
                out.planes[p][static_cast<size_t>(y) * ow + x] =
                    clamp_u8(sum / (factor * factor));
            }
    }
    return out;
}

namespace {

double catmull_rom(double t) {
    t = std::abs(t);
    if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

std::vector<double> resize_plane_bicubic(const std::vector<uint8_t>& src, int sw, int sh,
                                         int ow, int oh) {
    std::vector<double> a(src.begin(), src.end());
    // Horizontal pass: sh lines of length sw (stride 1) -> length ow.
    std::vector<double> b(static_cast<size_t>(ow) * sh);
    {
        double scale = static_cast<double>(sw) / ow;
        for (int o = 0; o < ow; ++o) {
            double s = (o + 0.5) * scale - 0.5;
            double fl = std::floor(s);
            int base = static_cast<int>(fl);
            double frac = s - fl;
            double w[4];
            for (int k = 0; k < 4; ++k) w[k] = catmull_rom(frac - (k - 1));
            for (int y = 0; y < sh; ++y) {
                double acc = 0;
                for (int k = 0; k < 4; ++k) {
                    int idx = std::clamp(base + k - 1, 0, sw - 1);
                    acc += w[k] * a[static_cast<size_t>(y) * sw + idx];
                }
                b[static_cast<size_t>(y) * ow + o] = acc;
            }
        }
    }
    // Vertical pass.
    std::vector<double> c(static_cast<size_t>(ow) * oh);
    {
        double scale = static_cast<double>(sh) / oh;
        for (int o = 0; o < oh; ++o) {
            double s = (o + 0.5) * scale - 0.5;
            double fl = std::floor(s);
            int base = static_cast<int>(fl);
            double frac = s - fl;
            double w[4];
            for (int k = 0; k < 4; ++k) w[k] = catmull_rom(frac - (k - 1));
            for (int x = 0; x < ow; ++x) {
                double acc = 0;
                for (int k = 0; k < 4; ++k) {
                    int idx = std::clamp(base + k - 1, 0, sh - 1);
                    acc += w[k] * b[static_cast<size_t>(idx) * ow + x];
                }
                c[static_cast<size_t>(o) * ow + x] = acc;
            }
        }
    }
    return c;
}

}  // namespace

Frame resize_bicubic(const Frame& frame, int out_w, int out_h) {
    frame.validate();
    if (out_w <= 0 || out_h <= 0) throw ShapeError("resize target must be positive");
    if (frame.color == ColorTag::YCbCr420 && (out_w % 2 || out_h % 2))
        throw ShapeError("4:2:0 resize target must have even dimensions");
    Frame out = Frame::make(out_w, out_h, frame.color);
    for (int p = 0; p < frame.plane_count(); ++p) {
        auto vals = resize_plane_bicubic(frame.planes[p], frame.plane_width(p),
                                         frame.plane_height(p), out.plane_width(p),
                                         out.plane_height(p));
        for (size_t i = 0; i < vals.size(); ++i) out.planes[p][i] = clamp_u8(vals[i]);
    }
    return out;
}

Frame upsample(const Frame& frame, int factor) {
    if (factor < 1) throw ConfigError("upsample factor must be >= 1");
    if (factor == 1) return frame;
    return resize_bicubic(frame, frame.width * factor, frame.height * factor);
}

// ---------------------------------------------------------------------------
// External codec hook

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "avth-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw ProcessError("cannot create temp directory");
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
    size_t pos;
    while ((pos = tmpl.find(key)) != std::string::npos) tmpl.replace(pos, key.size(), value);
    return tmpl;
}

void require_placeholders(const std::string& tmpl) {
    for (const char* key : {"{input}", "{output}", "{qp}"})
        if (tmpl.find(key) == std::string::npos)
            throw ConfigError(std::string("command template missing placeholder ") + key);
}

std::string run_template(const std::string& tmpl, const std::string& input,
                         const std::string& output, int qp) {
    std::string cmd = substitute(substitute(substitute(tmpl, "{input}", input),
                                            "{output}", output),
                                 "{qp}", std::to_string(qp));
    int rc = std::system(cmd.c_str());
    if (rc == -1) throw ProcessError("failed to spawn: " + cmd);
    int status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    if (status != 0)
        throw ProcessError("external codec exited with status " + std::to_string(status) +
                           ": " + cmd);
    return cmd;
}

std::vector<uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

}  // namespace

CodedChunk external_encode(const FrameSequence& frames, ChunkKind role, int qp,
                           const std::string& command_template) {
    require_placeholders(command_template);
    if (frames.frames.empty()) throw ShapeError("external_encode needs at least one frame");
    if (qp < 0 || qp > 51) throw ConfigError("qp must be in [0, 51]");
    TempDir tmp;
    std::string in_path = (tmp.path / "in.y4m").string();
    std::string out_path = (tmp.path / "out.bin").string();
    write_y4m(frames, in_path);
    std::string cmd = run_template(command_template, in_path, out_path, qp);
    CodedChunk chunk;
    chunk.kind = role;
    chunk.qp = qp;
    chunk.width = frames.frames[0].width;
    chunk.height = frames.frames[0].height;
    chunk.stream = read_bytes(out_path);
    if (chunk.stream.empty()) throw ProcessError("external codec produced no output: " + cmd);
    return chunk;
}

FrameSequence external_decode(const CodedChunk& chunk, const std::string& command_template) {
    require_placeholders(command_template);
    TempDir tmp;
    std::string in_path = (tmp.path / "in.bin").string();
    std::string out_path = (tmp.path / "out.y4m").string();
    {
        std::ofstream out(in_path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(chunk.stream.data()),
                  static_cast<std::streamsize>(chunk.stream.size()));
    }
    std::string cmd = run_template(command_template, in_path, out_path, chunk.qp);
    if (!std::filesystem::exists(out_path))
        throw ProcessError("external codec produced no output: " + cmd);
    return read_y4m(out_path);
}

}  // namespace avth
