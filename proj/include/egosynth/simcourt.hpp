#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egosynth/geometry.hpp"
#include "egosynth/rng.hpp"

namespace egosynth::sim {

struct Sequence {
    std::string id;
    std::vector<geom::CameraConfig> configs;

    std::size_t length() const { return configs.size(); }
};

using Observation = std::vector<double>;

/// One simulated drive: ground-truth configs plus per-frame observations.
struct SeqRecord {
    Sequence seq;
    std::vector<Observation> observations;
};

struct SimParams {
    double court_x = 15.0;  // baseline span, meters
    double court_y = 14.0;  // baseline to half-court line
    geom::Vec3 basket{7.5, 1.25, 3.05};
    int min_length = 20;
    int max_length = 30;
    int count = 988;
    double split = 815.0 / 988.0;
    double head_min = 1.6;
    double head_max = 2.0;
    double deflection = 1.2;         // evasive bow around the defender, meters
    double position_noise = 0.04;    // path jitter, meters
    double gaze_noise = 0.05;        // radians
    double observation_noise = 0.05;
    int d_obs = 20;
    std::uint64_t seed = 20240601;

    void validate() const;  // throws ValidationError
};

struct Dataset {
    std::vector<SeqRecord> train;
    std::vector<SeqRecord> test;
    geom::Normalizer normalizer;  // fitted on train configs only
    SimParams params;
    std::string id;
};

inline constexpr double kMaxStepMeters = 2.0;       // per frame at 5 fps
inline constexpr double kGoalRadiusMeters = 2.5;    // camera center to basket floor position
inline constexpr double kGoalFacingDegrees = 25.0;  // optical axis vs basket bearing

/// i/M with 1-based frame indices; i=0 permitted for the lower interval bound.
double normalized_time(std::size_t i, std::size_t m);

/// Camera center within the goal radius of the basket floor position and
/// optical axis within the facing cone of the basket bearing.
bool in_goal_region(const geom::CameraConfig& config, const SimParams& params);

double max_center_step(const Sequence& seq);

/// Throws ValidationError when a sequence breaks length, validity,
/// or step-bound requirements.
void validate_sequence(const Sequence& seq);

SeqRecord generate_sequence(const SimParams& params, Rng& rng, const std::string& id);

Dataset generate_dataset(const SimParams& params);

/// Fraction of 1m x 1m court cells containing at least one start position.
double start_cell_coverage(const Dataset& dataset);

/// One JSONL sequence file (header line + one record per sequence).
/// Observations may be absent (empty) for generated sequences.
void save_sequence_file(const std::string& path, const std::vector<SeqRecord>& records);
std::vector<SeqRecord> load_sequence_file(const std::string& path, int expect_d_obs);

/// Dataset directory: manifest.json + train.jsonl + test.jsonl.
void save_sequences(const std::string& dir, const Dataset& dataset);
Dataset load_sequences(const std::string& dir);

}  // namespace egosynth::sim
