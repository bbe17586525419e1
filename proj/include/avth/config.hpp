#pragma once

#include <cstdint>
#include <string>

#include "avth/nets.hpp"

namespace avth {

// Codec-wide settings. Loadable from a flat key=value file; command line
// flags override individual keys.
struct Config {
    int gop_size = 30;
    int keyframe_qp = 30;
    int aux_qp = 40;
    int downsample_factor = 4;
    int keypoints = 21;
    uint64_t seed = 1234;
    double sigma = 0.3;
    double mouth_alpha = 1.0;
    double lambda_p = 0.01;
    double mu_sync = 0.03;
    int audio_dim = 16;
    int latent_ch = 8;
    int attn_dim = 16;
    int feat_c = 4;
    int feat_d = 4;
    int feat_hw = 16;
    std::string extern_encode;  // external codec command templates
    std::string extern_decode;

    // Throws ConfigError naming the key on unknown keys or bad values.
    void apply(const std::string& key, const std::string& value);
    static Config from_file(const std::string& path);
    void validate() const;

    NetConfig net_config(int frame_w, int frame_h) const;
};

}  // namespace avth
