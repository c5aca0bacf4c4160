#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "egosynth/geometry.hpp"
#include "egosynth/netcore.hpp"
#include "egosynth/simcourt.hpp"

namespace egosynth::model {

/// Affine decorrelating map y = proj * (x - mean) fitted on training
/// observations. Directions with (numerically) zero variance are projected
/// out rather than amplified.
struct InputTransform {
    std::vector<double> mean;
    std::vector<double> proj;  // dim x dim, row-major

    std::size_t dim() const { return mean.size(); }
};

InputTransform fit_whitening(const std::vector<const sim::Observation*>& samples);
std::vector<double> apply_transform(const InputTransform& t, std::span<const double> x);

struct TrainConfig {
    long iterations = 10000;
    double lr = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch = 20;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EgoEncoder {
    net::NetParams net;  // whitened observation -> normalized 12D config
    InputTransform input;
    std::string dataset_id;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

struct FuturePredictor {
    net::NetParams trunk;                   // whitened observation -> hidden
    std::vector<net::NetParams> branches;   // hidden -> normalized 12D config
    InputTransform input;
    std::string dataset_id;
    double initial_loss = 0.0;
    double final_loss = 0.0;

    int k() const { return static_cast<int>(branches.size()); }
};

struct GoalVerifier {
    net::NetParams net;  // normalized 12D config -> score in (0,1)
    std::string dataset_id;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Open interval bounds ((j-1)/k, j/k) for 1-based branch j.
std::pair<double, double> branch_interval(int j, int k);

/// Branch owning normalized time s, with interval-endpoint ties assigned to
/// the lower branch; s=0 belongs to branch 1.
int branch_of(double s, int k);

/// 1 iff s > 0.92 (strict).
int goal_label(double s);

EgoEncoder train_ego_encoder(const sim::Dataset& dataset, const TrainConfig& cfg,
                             std::vector<double>* loss_log = nullptr);
geom::CameraConfig encode(const EgoEncoder& encoder, const sim::Observation& o);

FuturePredictor train_future(const sim::Dataset& dataset, int k, const TrainConfig& cfg,
                             std::vector<double>* loss_log = nullptr);
std::vector<geom::CameraConfig> predict_future(const FuturePredictor& predictor,
                                               const sim::Observation& o);

GoalVerifier train_goal_verifier(const sim::Dataset& dataset, const TrainConfig& cfg,
                                 std::vector<double>* loss_log = nullptr);

/// psi(h), clamped into the open interval (0,1).
double verify(const GoalVerifier& verifier, const geom::CameraConfig& h);

/// d psi / dh.
std::array<double, 12> verify_grad(const GoalVerifier& verifier, const geom::CameraConfig& h);

/// log psi(h) evaluated in logit space (finite even deep in saturation);
/// optionally also its gradient, which equals grad(psi)/psi.
double verifier_log_score(const GoalVerifier& verifier, const geom::CameraConfig& h,
                          std::array<double, 12>* grad = nullptr);

void save_ego(const std::string& path, const EgoEncoder& encoder);
EgoEncoder load_ego(const std::string& path);
void save_future(const std::string& path, const FuturePredictor& predictor);
FuturePredictor load_future(const std::string& path);
void save_verifier(const std::string& path, const GoalVerifier& verifier);
GoalVerifier load_verifier(const std::string& path);

}  // namespace egosynth::model
