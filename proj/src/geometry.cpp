#include "egosynth/geometry.hpp"

#include <cmath>
#include <vector>

#include "egosynth/errors.hpp"
#include "egosynth/linalg.hpp"

namespace egosynth::geom {

Mat3 identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a[3 * r + k] * b[3 * k + c];
            out[3 * r + c] = s;
        }
    return out;
}

Mat3 transpose(const Mat3& m) {
    return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

double determinant(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 inverse(const Mat3& m) {
    const double det = determinant(m);
    double scale = 0.0;
    for (double x : m) scale = std::max(scale, std::fabs(x));
    if (!std::isfinite(det) || std::fabs(det) <= 1e-14 * std::max(scale * scale * scale, 1e-30))
        throw DegeneracyError("matrix is singular, cannot invert");
    const double inv = 1.0 / det;
    Mat3 out;
    out[0] = (m[4] * m[8] - m[5] * m[7]) * inv;
    out[1] = (m[2] * m[7] - m[1] * m[8]) * inv;
    out[2] = (m[1] * m[5] - m[2] * m[4]) * inv;
    out[3] = (m[5] * m[6] - m[3] * m[8]) * inv;
    out[4] = (m[0] * m[8] - m[2] * m[6]) * inv;
    out[5] = (m[2] * m[3] - m[0] * m[5]) * inv;
    out[6] = (m[3] * m[7] - m[4] * m[6]) * inv;
    out[7] = (m[1] * m[6] - m[0] * m[7]) * inv;
    out[8] = (m[0] * m[4] - m[1] * m[3]) * inv;
    return out;
}

double max_abs_diff(const Mat3& a, const Mat3& b) {
    double d = 0.0;
    for (int i = 0; i < 9; ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

bool is_rotation(const Mat3& m, double tol) {
    for (double x : m)
        if (!std::isfinite(x)) return false;
    const Mat3 gram = matmul(transpose(m), m);
    if (max_abs_diff(gram, identity()) > tol) return false;
    return std::fabs(determinant(m) - 1.0) <= tol;
}

bool all_finite(const CameraConfig& config) {
    for (double x : config.v)
        if (!std::isfinite(x)) return false;
    return true;
}

CameraConfig flatten_pose(const Pose& pose) {
    if (!is_rotation(pose.rotation))
        throw ValidationError("rotation block is not orthonormal with determinant +1");
    CameraConfig out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out[4 * r + c] = pose.rotation[3 * r + c];
        out[4 * r + 3] = pose.translation[r];
    }
    return out;
}

Pose decompose(const CameraConfig& config, RotationCheck check) {
    if (!all_finite(config)) throw ValidationError("camera config has non-finite entries");
    Pose pose;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose.rotation[3 * r + c] = config[4 * r + c];
        pose.translation[r] = config[4 * r + 3];
    }
    if (check == RotationCheck::Strict) {
        if (!is_rotation(pose.rotation))
            throw ValidationError("rotation block is not orthonormal with determinant +1");
    } else {
        pose.rotation = orthonormalize_rotation(pose.rotation);
    }
    return pose;
}

Mat3 orthonormalize_rotation(const Mat3& m) {
    for (double x : m)
        if (!std::isfinite(x)) throw ValidationError("matrix has non-finite entries");

    Mat3 cur = m;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        const Mat3 inv_t = transpose(inverse(cur));
        Mat3 next;
        for (int i = 0; i < 9; ++i) next[i] = 0.5 * (cur[i] + inv_t[i]);
        const double delta = max_abs_diff(next, cur);
        cur = next;
        if (delta < 1e-12) {
            converged = true;
            break;
        }
    }
    if (!converged) throw DegeneracyError("orthonormalization did not converge");

    if (determinant(cur) > 0.0) return cur;

    // Orthogonal factor came out as a reflection; flip it along the direction
    // of least stretch to get the nearest proper rotation.
    const Mat3 h = matmul(transpose(cur), m);
    std::vector<double> a(h.begin(), h.end());
    std::vector<double> eigvals, eigvecs;
    linalg::eigen_symmetric(3, a, eigvals, eigvecs);
    const Vec3 u{eigvecs[6], eigvecs[7], eigvecs[8]};
    Mat3 flip = identity();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) flip[3 * r + c] -= 2.0 * u[r] * u[c];
    return matmul(cur, flip);
}

Vec3 camera_center(const CameraConfig& config) {
    const Pose pose = decompose(config, RotationCheck::Lenient);
    return scale(mat_vec(transpose(pose.rotation), pose.translation), -1.0);
}

Vec2 court_projection(const CameraConfig& config) {
    const Vec3 c = camera_center(config);
    return {c[0], c[1]};
}

Normalizer fit_normalizer(std::span<const CameraConfig> configs) {
    if (configs.empty()) throw ValidationError("cannot fit normalizer on empty set");
    Normalizer n;
    const double count = static_cast<double>(configs.size());
    for (int d = 0; d < 12; ++d) {
        double mean = 0.0;
        for (const auto& cfg : configs) mean += cfg[d];
        mean /= count;
        double var = 0.0;
        for (const auto& cfg : configs) {
            const double diff = cfg[d] - mean;
            var += diff * diff;
        }
        var /= count;
        n.mean[d] = mean;
        const double sd = std::sqrt(var);
        n.stddev[d] = sd < 1e-12 ? 1.0 : sd;
    }
    return n;
}

CameraConfig normalize(const CameraConfig& config, const Normalizer& n) {
    CameraConfig out;
    for (int d = 0; d < 12; ++d) out[d] = (config[d] - n.mean[d]) / n.stddev[d];
    return out;
}

CameraConfig denormalize(const CameraConfig& config, const Normalizer& n) {
    CameraConfig out;
    for (int d = 0; d < 12; ++d) out[d] = config[d] * n.stddev[d] + n.mean[d];
    return out;
}

}  // namespace egosynth::geom
