#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "egosynth/errors.hpp"
#include "egosynth/geometry.hpp"
#include "egosynth/rng.hpp"

using namespace egosynth;
using namespace egosynth::geom;

namespace {

Mat3 rotation_z90() { return {0, -1, 0, 1, 0, 0, 0, 0, 1}; }

Mat3 random_rotation(Rng& rng) {
    double q[4];
    double nrm = 0.0;
    do {
        nrm = 0.0;
        for (double& x : q) {
            x = rng.normal();
            nrm += x * x;
        }
        nrm = std::sqrt(nrm);
    } while (nrm < 1e-6);
    const double w = q[0] / nrm, x = q[1] / nrm, y = q[2] / nrm, z = q[3] / nrm;
    return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
            2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
            2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

CameraConfig random_config(Rng& rng) {
    Pose p;
    p.rotation = random_rotation(rng);
    for (double& t : p.translation) t = rng.uniform(-10.0, 10.0);
    return flatten_pose(p);
}

double frobenius_diff(const Mat3& a, const Mat3& b) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("flatten_pose identity cases") {
    Pose p;
    CameraConfig c = flatten_pose(p);
    CameraConfig want{{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0}};
    CHECK(c == want);

    p.translation = {1, 2, 3};
    c = flatten_pose(p);
    want = CameraConfig{{1, 0, 0, 1, 0, 1, 0, 2, 0, 0, 1, 3}};
    CHECK(c == want);
}

TEST_CASE("flatten_pose quarter-turn about z") {
    Pose p;
    p.rotation = rotation_z90();
    const CameraConfig c = flatten_pose(p);
    const CameraConfig want{{0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0}};
    CHECK(c == want);
}

TEST_CASE("flatten_pose rejects a non-rotation") {
    Pose p;
    p.rotation = {1.1, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_AS(flatten_pose(p), ValidationError);
}

TEST_CASE("decompose round-trips the flatten example") {
    const CameraConfig c{{1, 0, 0, 1, 0, 1, 0, 2, 0, 0, 1, 3}};
    const Pose p = decompose(c, RotationCheck::Strict);
    CHECK(p.rotation == identity());
    CHECK(p.translation == Vec3{1, 2, 3});
}

TEST_CASE("decompose strict rejects a scaled rotation block") {
    CameraConfig c;
    for (int i = 0; i < 3; ++i) c[4 * i + i] = 1.01;
    CHECK_THROWS_AS(decompose(c, RotationCheck::Strict), ValidationError);
}

TEST_CASE("decompose lenient repairs a scaled rotation block") {
    CameraConfig c;
    for (int i = 0; i < 3; ++i) c[4 * i + i] = 1.01;
    c[3] = 4;
    c[7] = 5;
    c[11] = 6;
    const Pose p = decompose(c, RotationCheck::Lenient);
    CHECK(max_abs_diff(p.rotation, identity()) < 1e-9);
    CHECK(p.translation == Vec3{4, 5, 6});
}

TEST_CASE("orthonormalize_rotation fixed points and scaling") {
    CHECK(max_abs_diff(orthonormalize_rotation(identity()), identity()) < 1e-12);
    Mat3 twice{};
    for (int i = 0; i < 3; ++i) twice[3 * i + i] = 2.0;
    CHECK(max_abs_diff(orthonormalize_rotation(twice), identity()) < 1e-9);
}

TEST_CASE("orthonormalize_rotation beats random rotations on a perturbed matrix") {
    Rng rng(20240601);
    Mat3 m = identity();
    for (double& x : m) x += 0.01 * rng.uniform(-1.0, 1.0);
    const Mat3 o = orthonormalize_rotation(m);

    CHECK(max_abs_diff(matmul(transpose(o), o), identity()) < 1e-9);
    CHECK(determinant(o) == doctest::Approx(1.0).epsilon(1e-9));

    const double best = frobenius_diff(o, m);
    Rng qrng(77);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 q = random_rotation(qrng);
        CHECK(best <= frobenius_diff(q, m) + 1e-12);
    }
}

TEST_CASE("orthonormalize_rotation resolves a negative determinant") {
    // Polar factor of diag(2, 1, -1/2) is the reflection diag(1, 1, -1);
    // the nearest proper rotation flips back along the weakest axis.
    const Mat3 m{2, 0, 0, 0, 1, 0, 0, 0, -0.5};
    const Mat3 o = orthonormalize_rotation(m);
    CHECK(max_abs_diff(o, identity()) < 1e-9);
}

TEST_CASE("orthonormalize_rotation rejects singular input") {
    const Mat3 m{1, 0, 0, 0, 1, 0, 0, 0, 0};
    CHECK_THROWS_AS(orthonormalize_rotation(m), DegeneracyError);
}

TEST_CASE("orthonormalize_rotation is idempotent and proper on random input") {
    Rng rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
        Mat3 m = random_rotation(rng);
        for (double& x : m) x += 0.05 * rng.uniform(-1.0, 1.0);
        const Mat3 o = orthonormalize_rotation(m);
        CHECK(max_abs_diff(matmul(transpose(o), o), identity()) < 1e-9);
        CHECK(determinant(o) > 0.0);
        CHECK(max_abs_diff(orthonormalize_rotation(o), o) < 1e-9);
    }
}

TEST_CASE("camera_center examples") {
    Pose p;
    p.translation = {1, 2, 3};
    Vec3 c = camera_center(flatten_pose(p));
    CHECK(c[0] == doctest::Approx(-1));
    CHECK(c[1] == doctest::Approx(-2));
    CHECK(c[2] == doctest::Approx(-3));

    p.rotation = rotation_z90();
    p.translation = {1, 0, 0};
    c = camera_center(flatten_pose(p));
    CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(c[1] == doctest::Approx(1.0));
    CHECK(c[2] == doctest::Approx(0.0).epsilon(1e-9));

    CHECK(camera_center(flatten_pose(Pose{})) == Vec3{0, 0, 0});
}

TEST_CASE("camera center satisfies R*c + t = 0") {
    Rng rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        const CameraConfig cfg = random_config(rng);
        const Pose p = decompose(cfg, RotationCheck::Strict);
        const Vec3 c = camera_center(cfg);
        const Vec3 resid = add(mat_vec(p.rotation, c), p.translation);
        CHECK(norm(resid) < 1e-9);
    }
}

TEST_CASE("court_projection drops the vertical axis") {
    Pose p;
    p.translation = {-3, -4, -1.7};  // center (3, 4, 1.7)
    Vec2 xy = court_projection(flatten_pose(p));
    CHECK(xy[0] == doctest::Approx(3));
    CHECK(xy[1] == doctest::Approx(4));

    xy = court_projection(flatten_pose(Pose{}));
    CHECK(xy == Vec2{0, 0});

    p.rotation = rotation_z90();
    p.translation = {1, 0, 0};
    xy = court_projection(flatten_pose(p));
    CHECK(xy[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(xy[1] == doctest::Approx(1.0));
}

TEST_CASE("fit_normalizer population statistics") {
    CameraConfig a, b;
    a[0] = 1;
    b[0] = 3;
    const std::vector<CameraConfig> configs{a, b};
    const Normalizer n = fit_normalizer(configs);
    CHECK(n.mean[0] == doctest::Approx(2));
    CHECK(n.stddev[0] == doctest::Approx(1));

    const CameraConfig normed = normalize(b, n);
    CHECK(normed[0] == doctest::Approx(1));
}

TEST_CASE("fit_normalizer clamps zero spread") {
    Rng rng(9);
    const CameraConfig only = random_config(rng);
    const Normalizer n = fit_normalizer(std::vector<CameraConfig>{only});
    for (int d = 0; d < 12; ++d) {
        CHECK(n.mean[d] == only[d]);
        CHECK(n.stddev[d] == 1.0);
    }

    const std::vector<CameraConfig> constant(5, only);
    const Normalizer nc = fit_normalizer(constant);
    const CameraConfig z = normalize(only, nc);
    for (int d = 0; d < 12; ++d) CHECK(z[d] == doctest::Approx(0.0));
}

TEST_CASE("fit_normalizer rejects an empty list") {
    CHECK_THROWS_AS(fit_normalizer(std::vector<CameraConfig>{}), ValidationError);
}

TEST_CASE("normalize of the mean is zero") {
    Rng rng(10);
    std::vector<CameraConfig> configs;
    for (int i = 0; i < 8; ++i) configs.push_back(random_config(rng));
    const Normalizer n = fit_normalizer(configs);
    CameraConfig mean;
    mean.v = n.mean;
    const CameraConfig z = normalize(mean, n);
    for (int d = 0; d < 12; ++d) CHECK(std::fabs(z[d]) < 1e-12);
}

TEST_CASE("normalize/denormalize round-trip") {
    Rng rng(11);
    std::vector<CameraConfig> configs;
    for (int i = 0; i < 100; ++i) configs.push_back(random_config(rng));
    const Normalizer n = fit_normalizer(configs);
    for (const auto& cfg : configs) {
        const CameraConfig back = denormalize(normalize(cfg, n), n);
        for (int d = 0; d < 12; ++d) CHECK(std::fabs(back[d] - cfg[d]) < 1e-12);
    }
}

TEST_CASE("flatten/decompose round-trip on random poses") {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        Pose p;
        p.rotation = random_rotation(rng);
        for (double& t : p.translation) t = rng.uniform(-20.0, 20.0);
        const Pose back = decompose(flatten_pose(p), RotationCheck::Strict);
        CHECK(max_abs_diff(back.rotation, p.rotation) < 1e-9);
        for (int i = 0; i < 3; ++i) CHECK(std::fabs(back.translation[i] - p.translation[i]) < 1e-9);
    }
}
