#include "avth/media_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "avth/error.hpp"
#include "avth/util.hpp"

namespace avth {

namespace {

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const void* data, size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw FormatError("write failed: " + path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Y4M

FrameSequence read_y4m(const std::string& path) {
    std::vector<uint8_t> buf = slurp(path);
    const char magic[] = "YUV4MPEG2";
    if (buf.size() < 9 || std::memcmp(buf.data(), magic, 9) != 0)
        throw FormatError(path + ": missing YUV4MPEG2 signature");

    size_t pos = 9;
    size_t eol = pos;
    while (eol < buf.size() && buf[eol] != '\n') ++eol;
    if (eol == buf.size()) throw FormatError(path + ": unterminated stream header");
    std::string header_tail(buf.begin() + pos, buf.begin() + eol);

    FrameSequence seq;
    seq.y4m_header_tail = header_tail;
    int width = 0, height = 0;
    uint32_t fps_num = 0, fps_den = 0;
    std::string chroma = "420";  // Y4M default

    std::istringstream toks(header_tail);
    std::string tok;
    while (toks >> tok) {
        switch (tok[0]) {
            case 'W': width = std::stoi(tok.substr(1)); break;
            case 'H': height = std::stoi(tok.substr(1)); break;
            case 'F': {
                size_t colon = tok.find(':');
                if (colon == std::string::npos) throw FormatError(path + ": bad F token");
                fps_num = static_cast<uint32_t>(std::stoul(tok.substr(1, colon - 1)));
                fps_den = static_cast<uint32_t>(std::stoul(tok.substr(colon + 1)));
                break;
            }
            case 'C': chroma = tok.substr(1); break;
            default: break;  // I, A, X tokens preserved via header_tail
        }
    }
    if (width <= 0 || height <= 0) throw FormatError(path + ": missing or bad W/H");
    if (fps_num == 0 || fps_den == 0) throw FormatError(path + ": missing or bad frame rate");
    if (chroma.rfind("420", 0) != 0)
        throw FormatError(path + ": unsupported chroma layout C" + chroma + " (4:2:0 only)");
    if (width % 2 || height % 2) throw FormatError(path + ": 4:2:0 needs even dimensions");

    seq.fps = {fps_num, fps_den};
    size_t luma = static_cast<size_t>(width) * height;
    size_t chroma_sz = luma / 4;

    pos = eol + 1;
    while (pos < buf.size()) {
        const char fm[] = "FRAME";
        if (buf.size() - pos < 5 || std::memcmp(buf.data() + pos, fm, 5) != 0)
            throw FormatError(path + ": malformed FRAME header");
        pos += 5;
        size_t fe = pos;
        while (fe < buf.size() && buf[fe] != '\n') ++fe;
        if (fe == buf.size()) throw FormatError(path + ": unterminated FRAME header");
        seq.y4m_frame_tails.emplace_back(buf.begin() + pos, buf.begin() + fe);
        pos = fe + 1;

        if (buf.size() - pos < luma + 2 * chroma_sz)
            throw FormatError(path + ": truncated frame payload at frame " +
                              std::to_string(seq.frames.size()));
        Frame f = Frame::make(width, height, ColorTag::YCbCr420);
        std::memcpy(f.planes[0].data(), buf.data() + pos, luma);
        std::memcpy(f.planes[1].data(), buf.data() + pos + luma, chroma_sz);
        std::memcpy(f.planes[2].data(), buf.data() + pos + luma + chroma_sz, chroma_sz);
        pos += luma + 2 * chroma_sz;
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

void write_y4m(const FrameSequence& seq, const std::string& path) {
    seq.validate();
    if (!seq.frames.empty() && seq.frames[0].color != ColorTag::YCbCr420)
        throw FormatError("write_y4m expects 4:2:0 frames");

    std::string out;
    out += "YUV4MPEG2";
    if (!seq.y4m_header_tail.empty()) {
        out += seq.y4m_header_tail;
    } else {
        int w = seq.frames.empty() ? 0 : seq.frames[0].width;
        int h = seq.frames.empty() ? 0 : seq.frames[0].height;
        out += " W" + std::to_string(w) + " H" + std::to_string(h) + " F" +
               std::to_string(seq.fps.num) + ":" + std::to_string(seq.fps.den) +
               " Ip A1:1 C420jpeg";
    }
    out += '\n';
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        out += "FRAME";
        if (i < seq.y4m_frame_tails.size()) out += seq.y4m_frame_tails[i];
        out += '\n';
        for (const auto& plane : seq.frames[i].planes)
            out.append(reinterpret_cast<const char*>(plane.data()), plane.size());
    }
    dump(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// WAV

namespace {

uint32_t rd_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void wr_u16(std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::vector<uint8_t> buf = slurp(path);
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
        std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw FormatError(path + ": not a RIFF/WAVE file");

    uint16_t channels = 0, bits = 0, codec = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    const uint8_t* data = nullptr;
    uint32_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        uint32_t len = rd_u32(buf.data() + pos + 4);
        const uint8_t* body = buf.data() + pos + 8;
        if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
            if (len < 16 || pos + 8 + len > buf.size())
                throw FormatError(path + ": truncated fmt chunk");
            codec = rd_u16(body);
            channels = rd_u16(body + 2);
            rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
            if (pos + 8 + len > buf.size())
                throw FormatError(path + ": truncated data chunk");
            data = body;
            data_len = len;
        }
        pos += 8 + len + (len & 1);  // chunks are word-aligned
    }
    if (!have_fmt) throw FormatError(path + ": missing fmt chunk");
    if (codec != 1) throw FormatError(path + ": non-PCM codec tag " + std::to_string(codec));
    if (bits != 16) throw FormatError(path + ": only 16-bit PCM supported");
    if (channels != 1 && channels != 2)
        throw FormatError(path + ": unsupported channel count " + std::to_string(channels));
    if (rate == 0) throw FormatError(path + ": zero sample rate");
    if (!data) throw FormatError(path + ": missing data chunk");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    size_t n = data_len / (2 * channels);
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        if (channels == 1) {
            clip.samples[i] = static_cast<int16_t>(rd_u16(data + 2 * i));
        } else {
            int16_t l = static_cast<int16_t>(rd_u16(data + 4 * i));
            int16_t r = static_cast<int16_t>(rd_u16(data + 4 * i + 2));
            clip.samples[i] = clamp_i16((static_cast<double>(l) + r) / 2.0);
        }
    }
    return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
    if (clip.sample_rate <= 0) throw FormatError("write_wav: sample rate must be positive");
    uint32_t data_len = static_cast<uint32_t>(clip.samples.size() * 2);
    std::string out;
    out += "RIFF";
    wr_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    wr_u32(out, 16);
    wr_u16(out, 1);  // PCM
    wr_u16(out, 1);  // mono
    wr_u32(out, static_cast<uint32_t>(clip.sample_rate));
    wr_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);  // byte rate
    wr_u16(out, 2);                                            // block align
    wr_u16(out, 16);                                           // bits
    out += "data";
    wr_u32(out, data_len);
    for (int16_t s : clip.samples) wr_u16(out, static_cast<uint16_t>(s));
    dump(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// PGM / PPM

Frame read_pnm(const std::string& path) {
    std::vector<uint8_t> buf = slurp(path);
    if (buf.size() < 2) throw FormatError(path + ": not a PNM file");
    bool rgb;
    if (buf[0] == 'P' && buf[1] == '5') rgb = false;
    else if (buf[0] == 'P' && buf[1] == '6') rgb = true;
    else throw FormatError(path + ": expected P5 or P6 magic");

    size_t pos = 2;
    auto next_int = [&]() -> int {
        while (pos < buf.size()) {
            if (buf[pos] == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (std::isspace(buf[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        int v = 0;
        bool any = false;
        while (pos < buf.size() && std::isdigit(buf[pos])) {
            v = v * 10 + (buf[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any) throw FormatError(path + ": malformed PNM header");
        return v;
    };

    int w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw FormatError(path + ": only maxval 255 supported");
    ++pos;  // single whitespace after maxval
    size_t need = static_cast<size_t>(w) * h * (rgb ? 3 : 1);
    if (buf.size() - pos < need) throw FormatError(path + ": truncated pixel data");

    Frame f = Frame::make(w, h, rgb ? ColorTag::Rgb : ColorTag::Gray);
    if (rgb) {
        for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i)
            for (int c = 0; c < 3; ++c) f.planes[c][i] = buf[pos + 3 * i + c];
    } else {
        std::memcpy(f.planes[0].data(), buf.data() + pos, need);
    }
    return f;
}

void write_pnm(const Frame& frame, const std::string& path) {
    frame.validate();
    if (frame.color == ColorTag::YCbCr420)
        throw FormatError("write_pnm expects RGB or Gray frames");
    bool rgb = frame.color == ColorTag::Rgb;
    std::string out = rgb ? "P6\n" : "P5\n";
    out += std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
    size_t n = static_cast<size_t>(frame.width) * frame.height;
    if (rgb) {
        for (size_t i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(frame.planes[c][i]));
    } else {
        out.append(reinterpret_cast<const char*>(frame.planes[0].data()), n);
    }
    dump(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// Color conversion (BT.601 full range)

std::array<uint8_t, 3> yuv_to_rgb_px(uint8_t y, uint8_t cb, uint8_t cr) {
    double yf = y, cbf = cb - 128.0, crf = cr - 128.0;
    return {clamp_u8(yf + 1.402 * crf),
            clamp_u8(yf - 0.344136 * cbf - 0.714136 * crf),
            clamp_u8(yf + 1.772 * cbf)};
}

std::array<uint8_t, 3> rgb_to_yuv_px(uint8_t r, uint8_t g, uint8_t b) {
    double rf = r, gf = g, bf = b;
    return {clamp_u8(0.299 * rf + 0.587 * gf + 0.114 * bf),
            clamp_u8(128.0 - 0.168736 * rf - 0.331264 * gf + 0.5 * bf),
            clamp_u8(128.0 + 0.5 * rf - 0.418688 * gf - 0.081312 * bf)};
}

Frame yuv_to_rgb(const Frame& frame) {
    frame.validate();
    if (frame.color != ColorTag::YCbCr420)
        throw ShapeError("yuv_to_rgb expects a 4:2:0 frame");
    Frame out = Frame::make(frame.width, frame.height, ColorTag::Rgb);
    int cw = frame.plane_width(1);
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            size_t ci = static_cast<size_t>(y / 2) * cw + x / 2;
            auto rgb = yuv_to_rgb_px(frame.at(0, y, x), frame.planes[1][ci], frame.planes[2][ci]);
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = rgb[c];
        }
    }
    return out;
}

Frame rgb_to_yuv(const Frame& frame) {
    frame.validate();
    if (frame.color != ColorTag::Rgb) throw ShapeError("rgb_to_yuv expects an RGB frame");
    if (frame.width % 2 || frame.height % 2)
        throw ShapeError("rgb_to_yuv needs even dimensions for 4:2:0 output");
    Frame out = Frame::make(frame.width, frame.height, ColorTag::YCbCr420);
    int cw = out.plane_width(1), ch = out.plane_height(1);
    // Full-res Y, box-averaged chroma.
    std::vector<double> cb(static_cast<size_t>(frame.width) * frame.height);
    std::vector<double> cr(cb.size());
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            double rf = frame.at(0, y, x), gf = frame.at(1, y, x), bf = frame.at(2, y, x);
            out.at(0, y, x) = clamp_u8(0.299 * rf + 0.587 * gf + 0.114 * bf);
            size_t i = static_cast<size_t>(y) * frame.width + x;
            cb[i] = 128.0 - 0.168736 * rf - 0.331264 * gf + 0.5 * bf;
            cr[i] = 128.0 + 0.5 * rf - 0.418688 * gf - 0.081312 * bf;
        }
    }
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            size_t i00 = static_cast<size_t>(2 * y) * frame.width + 2 * x;
            size_t i10 = i00 + frame.width;
            out.planes[1][static_cast<size_t>(y) * cw + x] =
                clamp_u8((cb[i00] + cb[i00 + 1] + cb[i10] + cb[i10 + 1]) / 4.0);
            out.planes[2][static_cast<size_t>(y) * cw + x] =
                clamp_u8((cr[i00] + cr[i00 + 1] + cr[i10] + cr[i10 + 1]) / 4.0);
        }
    }
    return out;
}

}  // namespace avth
