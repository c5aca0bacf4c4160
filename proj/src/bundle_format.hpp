#pragma once

#include <string>
#include <vector>

#include "json.hpp"

// Shared pieces of the model-bundle file format and training bookkeeping,
// used by the trained-model and baseline serializers alike.
namespace egosynth::detail {

void write_bundle(const std::string& path, const std::string& body);

/// Parses header + body and checks the role tag.
nlohmann::json read_bundle(const std::string& path, const std::string& role);

/// Opening fields of a bundle body object (unterminated).
std::string bundle_prefix(const std::string& role, const std::string& dataset_id,
                          double initial_loss, double final_loss);

/// Mean of the first and last (up to) 50 entries of a batch-loss log.
void finish_losses(const std::vector<double>& log, double* initial, double* final_);

}  // namespace egosynth::detail
