#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace avth {

struct Vec3 {
    double x = 0, y = 0, z = 0;
    double operator[](int i) const { return i == 0 ? x : i == 1 ? y : z; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

struct Mat3 {
    // Row-major: m[r*3+c].
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }
    double at(int r, int c) const { return m[r * 3 + c]; }
    double& at(int r, int c) { return m[r * 3 + c]; }
    Mat3 mul(const Mat3& o) const;
    Mat3 transpose() const;
    double det() const;
    // Row vector times matrix: (v * M)_j = sum_i v_i M_ij.
    Vec3 row_mul(const Vec3& v) const;
};

// Per-frame motion description: keypoints transform as
//   S * (x_c * R + delta) + T   (rows of x_c are 3-vectors).
struct MotionParams {
    double scale = 1.0;
    Mat3 rotation;
    std::vector<Vec3> expression;  // K rows
    Vec3 translation;

    void validate(size_t k) const;  // rotation orthonormal, det +1, scale > 0
};

struct CanonicalKeypoints {
    std::vector<Vec3> points;
    size_t count() const { return points.size(); }
};

struct KeypointSet {
    std::vector<Vec3> points;
    size_t count() const { return points.size(); }
};

// Per-keypoint corrections, nonzero only on the designated mouth indices.
struct MouthOffset {
    std::vector<Vec3> offsets;
    static MouthOffset zeros(size_t k) { return {std::vector<Vec3>(k)}; }
};

// R = Rz(roll) * Ry(yaw) * Rx(pitch); keypoints multiply on the right (x*R).
Mat3 rotation_from_euler(double pitch, double yaw, double roll);

KeypointSet compose_key(const CanonicalKeypoints& canonical, const MotionParams& key);

// Composite motion for target i relative to the reference target 0:
//   S_key*(S_i/S_0) * (x_c * (R_i * R_0^T * R_key))
//   + (d_key + d_i - d_0) + (T_key + T_i - T_0) + mouth_i
// The delta and translation sums sit outside the scale product.
KeypointSet compose_target(const CanonicalKeypoints& canonical, const MotionParams& key,
                           const MotionParams& ref, const MotionParams& target,
                           const MouthOffset& mouth);

// Linear pull toward a closed-mouth template on the mouth keypoints:
// offset = alpha * (template - x) there, zero elsewhere.
MouthOffset mouth_retarget(const KeypointSet& keypoints, const std::vector<int>& mouth_indices,
                           const std::vector<Vec3>& closed_template, double alpha);

// Deterministic face-shaped canonical layout in normalized [-1,1]^3 coords.
// The last quarter of the points (at least one) form the mouth cluster.
CanonicalKeypoints canonical_face_template(int k);
std::vector<int> default_mouth_indices(int k);

}  // namespace avth
