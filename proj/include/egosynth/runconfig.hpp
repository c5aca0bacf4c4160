#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egosynth/evaluation.hpp"
#include "egosynth/models.hpp"
#include "egosynth/simcourt.hpp"
#include "egosynth/synthesis.hpp"

namespace egosynth::run {

/// Everything a pipeline run needs, loadable from one JSON file. Paths are
/// directories relative to the output root unless absolute.
struct RunConfig {
    sim::SimParams sim;
    model::TrainConfig train_ego;
    model::TrainConfig train_future;
    model::TrainConfig train_verifier;
    model::TrainConfig train_recurrent;
    int branches = 4;
    synth::SynthesisOptions synthesis;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<std::string> methods = eval::kAllMethods;
    std::string data_dir = "data";
    std::string model_dir = "models";
    std::string synth_dir = "generated";
    std::string report_dir = "report";

    void validate() const;  // throws ValidationError
};

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& rc);
std::string config_json(const RunConfig& rc);

}  // namespace egosynth::run
