#pragma once

#include <array>
#include <cmath>
#include <span>

namespace egosynth::geom {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

inline constexpr double kRotationTol = 1e-9;

// ---- small fixed-size helpers ----

inline Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Mat3 identity();
Mat3 matmul(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& m);
Vec3 mat_vec(const Mat3& m, const Vec3& v);
double determinant(const Mat3& m);
Mat3 inverse(const Mat3& m);  // throws DegeneracyError when singular
double max_abs_diff(const Mat3& a, const Mat3& b);

// ---- domain types ----

/// Flattened 3x4 extrinsic [R|t], row-major: rows are (r1,r2,r3,t).
/// Rotation entries dimensionless, translation in meters.
struct CameraConfig {
    std::array<double, 12> v{};

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
    bool operator==(const CameraConfig&) const = default;
};

struct Pose {
    Mat3 rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 translation{};
};

/// Per-dimension mean/std over a set of configs; std entries are always > 0
/// (zero-spread dimensions are clamped to 1).
struct Normalizer {
    std::array<double, 12> mean{};
    std::array<double, 12> stddev{};

    Normalizer() { stddev.fill(1.0); }
    bool operator==(const Normalizer&) const = default;
};

enum class RotationCheck { Strict, Lenient };

// ---- operations ----

/// True when m is orthonormal with determinant +1 within tol.
bool is_rotation(const Mat3& m, double tol = kRotationTol);

bool all_finite(const CameraConfig& config);

CameraConfig flatten_pose(const Pose& pose);

/// Strict mode errors on an invalid rotation block; lenient mode
/// re-orthonormalizes it first.
Pose decompose(const CameraConfig& config, RotationCheck check);

/// Nearest rotation (polar factor, det +1) to a nonsingular matrix.
Mat3 orthonormalize_rotation(const Mat3& m);

/// Camera center c = -R^T t, after lenient decomposition.
Vec3 camera_center(const CameraConfig& config);

/// Top-down court position of the camera center (z dropped; z is up).
Vec2 court_projection(const CameraConfig& config);

/// Population mean/std per dimension; zero-spread dimensions get std 1.
Normalizer fit_normalizer(std::span<const CameraConfig> configs);

CameraConfig normalize(const CameraConfig& config, const Normalizer& n);
CameraConfig denormalize(const CameraConfig& config, const Normalizer& n);

}  // namespace egosynth::geom
