#include "avth/config.hpp"

#include <fstream>
#include <sstream>

#include "avth/error.hpp"

namespace avth {

namespace {

long long parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

}  // namespace

void Config::apply(const std::string& key, const std::string& value) {
    if (key == "gop_size") gop_size = static_cast<int>(parse_int(key, value));
    else if (key == "keyframe_qp") keyframe_qp = static_cast<int>(parse_int(key, value));
    else if (key == "aux_qp") aux_qp = static_cast<int>(parse_int(key, value));
    else if (key == "downsample_factor") downsample_factor = static_cast<int>(parse_int(key, value));
    else if (key == "keypoints") keypoints = static_cast<int>(parse_int(key, value));
    else if (key == "seed") seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "sigma") sigma = parse_real(key, value);
    else if (key == "mouth_alpha") mouth_alpha = parse_real(key, value);
    else if (key == "lambda_p") lambda_p = parse_real(key, value);
    else if (key == "mu_sync") mu_sync = parse_real(key, value);
    else if (key == "audio_dim") audio_dim = static_cast<int>(parse_int(key, value));
    else if (key == "latent_ch") latent_ch = static_cast<int>(parse_int(key, value));
    else if (key == "attn_dim") attn_dim = static_cast<int>(parse_int(key, value));
    else if (key == "feat_c") feat_c = static_cast<int>(parse_int(key, value));
    else if (key == "feat_d") feat_d = static_cast<int>(parse_int(key, value));
    else if (key == "feat_hw") feat_hw = static_cast<int>(parse_int(key, value));
    else if (key == "extern_encode") extern_encode = value;
    else if (key == "extern_decode") extern_decode = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void Config::validate() const {
    if (gop_size < 2) throw ConfigError("config key 'gop_size': must be at least 2");
    if (keyframe_qp < 0 || keyframe_qp > 51)
        throw ConfigError("config key 'keyframe_qp': must be in [0,51]");
    if (aux_qp < 0 || aux_qp > 51) throw ConfigError("config key 'aux_qp': must be in [0,51]");
    if (downsample_factor < 1)
        throw ConfigError("config key 'downsample_factor': must be at least 1");
    if (keypoints < 1) throw ConfigError("config key 'keypoints': must be at least 1");
    if (!(sigma > 0)) throw ConfigError("config key 'sigma': must be positive");
    if (mouth_alpha < 0 || mouth_alpha > 1)
        throw ConfigError("config key 'mouth_alpha': must be in [0,1]");
    if (lambda_p < 0) throw ConfigError("config key 'lambda_p': must be nonnegative");
    if (mu_sync < 0) throw ConfigError("config key 'mu_sync': must be nonnegative");
    if (audio_dim < 1) throw ConfigError("config key 'audio_dim': must be positive");
    if (latent_ch < 3) throw ConfigError("config key 'latent_ch': must be at least 3");
    if (attn_dim < 1) throw ConfigError("config key 'attn_dim': must be positive");
    if (feat_c < 1 || feat_d < 1 || feat_hw < 1)
        throw ConfigError("config keys 'feat_*': must be positive");
}

NetConfig Config::net_config(int frame_w, int frame_h) const {
    NetConfig nc;
    nc.frame_w = frame_w;
    nc.frame_h = frame_h;
    nc.feat_c = feat_c;
    nc.feat_d = feat_d;
    nc.feat_hw = feat_hw;
    nc.latent_ch = latent_ch;
    nc.audio_dim = audio_dim;
    nc.attn_dim = attn_dim;
    nc.keypoints = keypoints;
    nc.sigma = sigma;
    nc.mouth_alpha = mouth_alpha;
    nc.seed = seed;
    nc.validate();
    return nc;
}

}  // namespace avth
