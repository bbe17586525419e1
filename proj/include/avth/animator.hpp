#pragma once

#include <vector>

#include "avth/frame.hpp"
#include "avth/motion.hpp"
#include "avth/nets.hpp"
#include "avth/tensor.hpp"

namespace avth {

// 3D appearance feature, data laid out [C,D,H,W].
struct FeatureVolume {
    nn::Tensor data;
    int channels() const { return data.shape[0]; }
    int depth() const { return data.shape[1]; }
    int height() const { return data.shape[2]; }
    int width() const { return data.shape[3]; }
};

// Bicubic resize to the keyframe size plus the seeded residual enhancement.
Frame facial_sr(const Frame& aux_low, int target_w, int target_h, const FacialSrNet& net);

FeatureVolume extract_appearance(const Frame& keyframe, const AppearanceNet& net);

// Runs the motion head and assembles scale/rotation/expression/translation.
MotionParams extract_motion(const Frame& frame, const MotionNet& net);

// Keypoint-driven volume warp. Keypoints live in normalized [-1,1]^3
// coordinates (x along W, y along H, z along D). Each grid point p moves by
// the softmax-weighted keypoint flow
//   u(p) = sum_k w_k(p) (x_trg_k - x_key_k),
//   w_k(p) = softmax_k(-|p - x_key_k|^2 / (2 sigma^2)),
// and the volume is resampled at p - u(p) with trilinear interpolation and
// zero padding outside the grid.
FeatureVolume warp(const FeatureVolume& volume, const KeypointSet& x_key,
                   const KeypointSet& x_trg, double sigma);

// Flow field in normalized units, laid out [3,D,H,W] with components
// (x, y, z).
nn::Tensor warp_flow(int depth, int height, int width, const KeypointSet& x_key,
                     const KeypointSet& x_trg, double sigma);

// Analytic gradient of mean(warp(...)) with respect to the target keypoint
// coordinates; used by the finite-difference checks.
std::vector<Vec3> warp_grad_keypoints(const FeatureVolume& volume, const KeypointSet& x_key,
                                      const KeypointSet& x_trg, double sigma);

Frame generate(const FeatureVolume& volume, const GeneratorNet& net);

// Debug sidecars: little-endian f32 arrays. Keypoint files hold K*3 floats
// per set, in the order the sets are given; flow files hold the [3,D,H,W]
// field flattened.
void write_f32_sidecar(const std::string& path, const std::vector<const KeypointSet*>& sets);
void write_f32_sidecar(const std::string& path, const nn::Tensor& tensor);
std::vector<float> read_f32_sidecar(const std::string& path);

struct Stage1Debug {
    KeypointSet x_key;
    std::vector<KeypointSet> x_trg;  // one set per auxiliary frame
};

// Full Stage-I pass: animate the keyframe appearance with the motion of each
// auxiliary frame (already upsampled to keyframe size). The first auxiliary
// frame provides the reference motion.
FrameSequence stage1_reconstruct(const Frame& keyframe, const FrameSequence& aux_frames,
                                 const Stage1Nets& nets, const NetConfig& cfg,
                                 Stage1Debug* debug = nullptr);

}  // namespace avth
