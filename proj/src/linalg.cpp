#include "egosynth/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egosynth/errors.hpp"

namespace egosynth::linalg {

namespace {

double offdiag_norm(std::size_t n, const std::vector<double>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(2.0 * s);
}

}  // namespace

void eigen_symmetric(std::size_t n, const std::vector<double>& input,
                     std::vector<double>& eigvals, std::vector<double>& eigvecs) {
    if (input.size() != n * n) throw ValidationError("eigen_symmetric: bad matrix size");

    std::vector<double> a = input;
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double scale = 0.0;
    for (double x : a) scale = std::max(scale, std::fabs(x));
    const double stop = std::max(scale, 1.0) * 1e-14;

    for (int sweep = 0; sweep < 100 && offdiag_norm(n, a) > stop; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::fabs(apq) <= stop * 1e-2) continue;
                double app = a[p * n + p], aqq = a[q * n + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    double aip = a[i * n + p], aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    double apj = a[p * n + j], aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    double vpj = v[p * n + j], vqj = v[q * n + j];
                    v[p * n + j] = c * vpj - s * vqj;
                    v[q * n + j] = s * vpj + c * vqj;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a[i * n + i] > a[j * n + j];
    });

    eigvals.assign(n, 0.0);
    eigvecs.assign(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t src = order[r];
        eigvals[r] = a[src * n + src];
        // sign convention: largest-magnitude component positive
        std::size_t imax = 0;
        for (std::size_t j = 1; j < n; ++j)
            if (std::fabs(v[src * n + j]) > std::fabs(v[src * n + imax])) imax = j;
        double sign = v[src * n + imax] < 0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) eigvecs[r * n + j] = sign * v[src * n + j];
    }
}

}  // namespace egosynth::linalg
