#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "egosynth/geometry.hpp"
#include "egosynth/models.hpp"
#include "egosynth/simcourt.hpp"
#include "egosynth/synthesis.hpp"

namespace egosynth::eval {

/// Symmetric Hausdorff distance between the two frame sets in normalized
/// 12D space.
double hausdorff(const sim::Sequence& a, const sim::Sequence& b,
                 const geom::Normalizer& normalizer);

/// One test-set frame as a goal-progress lookup entry.
struct PoolEntry {
    geom::CameraConfig config;  // raw (unnormalized)
    std::string id;
    std::size_t index;   // 1-based frame index
    std::size_t length;  // owning sequence length
};

std::vector<PoolEntry> build_pool(const std::vector<sim::SeqRecord>& records);

/// Normalized-time v = i/N of the pool frame nearest to `last` in normalized
/// space; ties resolve to the earliest frame of the lowest sequence id.
double cg_score(const geom::CameraConfig& last, const std::vector<PoolEntry>& pool,
                const geom::Normalizer& normalizer);

/// The training sequence whose first config is nearest to `start`
/// (normalized space), returned verbatim.
sim::Sequence nn_baseline(const geom::CameraConfig& start,
                          const std::vector<sim::SeqRecord>& trainset,
                          const geom::Normalizer& normalizer);

struct RecurrentBaseline {
    net::NetParams step;  // normalized config -> residual to the next config
    double epsilon = 1e-3;
    std::size_t max_length = 0;  // longest training sequence
    std::string dataset_id;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

RecurrentBaseline train_recurrent(const sim::Dataset& dataset, const model::TrainConfig& cfg,
                                  std::vector<double>* loss_log = nullptr);

/// Iterates h <- h + step(h) from `start`, stopping once the update falls
/// below epsilon or the rollout would outgrow every real sequence.
sim::Sequence rollout(const RecurrentBaseline& baseline, const geom::CameraConfig& start,
                      const geom::Normalizer& normalizer, const std::string& id);

void save_recurrent(const std::string& path, const RecurrentBaseline& baseline);
RecurrentBaseline load_recurrent(const std::string& path);

/// Generates a sequence from a test record's first frame, or nothing on
/// failure (the failure is excluded and counted).
using Generator = std::function<sim::Sequence(const sim::SeqRecord&)>;

struct PfmResult {
    double mean = 0.0;
    std::vector<std::pair<std::string, double>> per_sequence;  // (id, distance)
    int excluded = 0;
};

PfmResult pfm_score(const Generator& generate, const std::vector<sim::SeqRecord>& testset,
                    const geom::Normalizer& normalizer);

/// Mean held-out L2 of the encoder, and of nearest-observation retrieval
/// from the training set, both in normalized config space.
double encoder_test_error(const model::EgoEncoder& encoder, const sim::Dataset& dataset);
double retrieval_test_error(const sim::Dataset& dataset);

/// Mann-Whitney AUC of positive scores over negative scores.
double auc_score(const std::vector<double>& positives, const std::vector<double>& negatives);

struct MethodResult {
    std::string method;
    double pfm_median = 0.0;
    std::optional<double> cg_median;
    std::vector<double> pfm_by_seed;
    std::vector<double> cg_by_seed;
    int excluded = 0;
};

struct DetailRow {
    std::string method;
    std::uint64_t seed;
    std::string id;
    double pfm;
    std::optional<double> cg;
};

struct MetricReport {
    std::string dataset_id;
    std::vector<std::uint64_t> seeds;
    double recurrent_epsilon = 0.0;
    std::vector<MethodResult> methods;
    std::vector<DetailRow> details;
    bool complete = true;

    const MethodResult* find(const std::string& method) const;
};

inline const std::vector<std::string> kAllMethods{"full", "no_verifier", "nn", "recurrent"};

/// Per-model training budgets for the benchmark; the seed field of each is
/// replaced by the benchmark seed on every retraining round.
struct BenchTrainConfigs {
    model::TrainConfig ego;
    model::TrainConfig future;
    model::TrainConfig verifier;
    model::TrainConfig recurrent;
    int branches = 4;
};

/// Retrains per seed, generates from every test start, and aggregates
/// seed-median PFM and CG per method (CG is undefined for the NN baseline).
MetricReport run_benchmark(const sim::Dataset& dataset, const std::vector<std::string>& methods,
                           const std::vector<std::uint64_t>& seeds,
                           const BenchTrainConfigs& cfgs, const synth::SynthesisOptions& opts);

/// Same, with one budget shared by all four models.
MetricReport run_benchmark(const sim::Dataset& dataset, const std::vector<std::string>& methods,
                           const std::vector<std::uint64_t>& seeds,
                           const model::TrainConfig& base_cfg, const synth::SynthesisOptions& opts);

/// Empty when all benchmark orderings hold; otherwise one message per
/// violation.
std::vector<std::string> check_orderings(const MetricReport& report);

/// Fixed-width aggregate table.
std::string format_report(const MetricReport& report);

void save_report(const std::string& table_path, const std::string& detail_path,
                 const MetricReport& report);

}  // namespace egosynth::eval
