#include "avth/motion.hpp"

#include <cmath>
#include <string>

#include "avth/error.hpp"

namespace avth {

Mat3 Mat3::mul(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += at(i, k) * o.at(k, j);
            r.at(i, j) = s;
        }
    return r;
}

Mat3 Mat3::transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
    return r;
}

double Mat3::det() const {
    return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
           at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
           at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
}

Vec3 Mat3::row_mul(const Vec3& v) const {
    return {v.x * at(0, 0) + v.y * at(1, 0) + v.z * at(2, 0),
            v.x * at(0, 1) + v.y * at(1, 1) + v.z * at(2, 1),
            v.x * at(0, 2) + v.y * at(1, 2) + v.z * at(2, 2)};
}

void MotionParams::validate(size_t k) const {
    if (!(scale > 0)) throw ConfigError("motion scale must be positive");
    if (expression.size() != k)
        throw ShapeError("expression rows (" + std::to_string(expression.size()) +
                         ") do not match keypoint count (" + std::to_string(k) + ")");
    Mat3 rtr = rotation.transpose().mul(rotation);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double want = i == j ? 1.0 : 0.0;
            if (std::abs(rtr.at(i, j) - want) > 1e-6)
                throw ShapeError("rotation is not orthonormal");
        }
    if (std::abs(rotation.det() - 1.0) > 1e-6) throw ShapeError("rotation must have det +1");
}

Mat3 rotation_from_euler(double pitch, double yaw, double roll) {
    double cp = std::cos(pitch), sp = std::sin(pitch);
    double cy = std::cos(yaw), sy = std::sin(yaw);
    double cr = std::cos(roll), sr = std::sin(roll);
    // Expanded Rz(roll)*Ry(yaw)*Rx(pitch).
    Mat3 r;
    r.at(0, 0) = cr * cy;
    r.at(0, 1) = cr * sy * sp - sr * cp;
    r.at(0, 2) = cr * sy * cp + sr * sp;
    r.at(1, 0) = sr * cy;
    r.at(1, 1) = sr * sy * sp + cr * cp;
    r.at(1, 2) = sr * sy * cp - cr * sp;
    r.at(2, 0) = -sy;
    r.at(2, 1) = cy * sp;
    r.at(2, 2) = cy * cp;
    return r;
}

KeypointSet compose_key(const CanonicalKeypoints& canonical, const MotionParams& key) {
    key.validate(canonical.count());
    KeypointSet out;
    out.points.reserve(canonical.count());
    for (size_t i = 0; i < canonical.count(); ++i) {
        Vec3 rotated = key.rotation.row_mul(canonical.points[i]);
        out.points.push_back((rotated + key.expression[i]) * key.scale + key.translation);
    }
    return out;
}

KeypointSet compose_target(const CanonicalKeypoints& canonical, const MotionParams& key,
                           const MotionParams& ref, const MotionParams& target,
                           const MouthOffset& mouth) {
    size_t k = canonical.count();
    key.validate(k);
    ref.validate(k);
    target.validate(k);
    if (mouth.offsets.size() != k) throw ShapeError("mouth offset rows do not match keypoints");
    if (!(ref.scale > 0)) throw ConfigError("reference scale must be positive");

    double s = key.scale * (target.scale / ref.scale);
    Mat3 composite = target.rotation.mul(ref.rotation.transpose()).mul(key.rotation);
    KeypointSet out;
    out.points.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        Vec3 rotated = composite.row_mul(canonical.points[i]) * s;
        Vec3 delta = key.expression[i] + target.expression[i] - ref.expression[i];
        Vec3 trans = key.translation + target.translation - ref.translation;
        out.points.push_back(rotated + delta + trans + mouth.offsets[i]);
    }
    return out;
}

MouthOffset mouth_retarget(const KeypointSet& keypoints, const std::vector<int>& mouth_indices,
                           const std::vector<Vec3>& closed_template, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("mouth retarget alpha must be in [0,1]");
    if (closed_template.size() != keypoints.count())
        throw ShapeError("closed template rows do not match keypoints");
    MouthOffset out = MouthOffset::zeros(keypoints.count());
    for (int idx : mouth_indices) {
        if (idx < 0 || static_cast<size_t>(idx) >= keypoints.count())
            throw ShapeError("mouth index " + std::to_string(idx) + " out of range");
        out.offsets[idx] = (closed_template[idx] - keypoints.points[idx]) * alpha;
    }
    return out;
}

CanonicalKeypoints canonical_face_template(int k) {
    if (k < 1) throw ConfigError("keypoint count must be at least 1");
    CanonicalKeypoints out;
    out.points.reserve(k);
    int mouth = std::max(1, k / 4);
    int face = k - mouth;
    for (int i = 0; i < face; ++i) {
        // Face outline and inner features on two elliptical rings.
        double u = face > 1 ? static_cast<double>(i) / face : 0.0;
        double ang = 2.0 * M_PI * u;
        double ring = (i % 2 == 0) ? 1.0 : 0.55;
        out.points.push_back({0.55 * ring * std::cos(ang),
                              0.62 * ring * std::sin(ang),
                              0.12 * std::sin(2.0 * ang)});
    }
    for (int i = 0; i < mouth; ++i) {
        double u = mouth > 1 ? static_cast<double>(i) / (mouth - 1) : 0.5;
        out.points.push_back({0.40 * (u - 0.5), -0.38 + 0.04 * std::sin(M_PI * u), 0.15});
    }
    return out;
}

std::vector<int> default_mouth_indices(int k) {
    int mouth = std::max(1, k / 4);
    std::vector<int> idx;
    for (int i = k - mouth; i < k; ++i) idx.push_back(i);
    return idx;
}

}  // namespace avth
