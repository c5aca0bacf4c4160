#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace egosynth::net {

enum class Act { Identity, Tanh, Sigmoid };

std::string act_name(Act a);
Act act_from_name(const std::string& name);

/// Layer sizes plus one activation per layer (hidden and output alike).
struct NetSpec {
    std::vector<int> sizes;
    std::vector<Act> acts;

    int input_size() const { return sizes.front(); }
    int output_size() const { return sizes.back(); }
    std::size_t layer_count() const { return acts.size(); }
    void validate() const;  // throws ValidationError
    bool operator==(const NetSpec&) const = default;
};

/// Weights row-major per layer: W[l] has shape sizes[l+1] x sizes[l].
/// uid identifies the initialization lineage; revision counts parameter
/// updates so a cache taken before an update can be rejected.
struct NetParams {
    NetSpec spec;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    std::uint64_t seed = 0;
    std::uint64_t uid = 0;
    std::uint64_t revision = 0;

    std::size_t parameter_count() const;
    bool all_finite() const;
};

/// Forward-pass record: input plus per-layer pre-activations and outputs.
struct Cache {
    std::uint64_t uid = 0;
    std::uint64_t revision = 0;
    std::vector<double> input;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> out;
};

struct Grads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void add(const Grads& other);
    void scale(double s);
};

struct SgdState {
    double lr = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<std::vector<double>> vel_weights;
    std::vector<std::vector<double>> vel_biases;
};

/// Uniform(-a, a) weights with a = sqrt(6/(fan_in+fan_out)); zero biases.
NetParams net_init(const NetSpec& spec, std::uint64_t seed);

Grads zero_grads(const NetParams& params);

std::vector<double> forward(const NetParams& params, std::span<const double> input,
                            Cache* cache = nullptr);

/// Gradients of a scalar loss with respect to all parameters, given the loss
/// gradient at the network output (after the output activation).
Grads backward_params(const NetParams& params, const Cache& cache,
                      std::span<const double> out_grad);

/// Same, but out_grad is taken at the output pre-activation (the output
/// activation's derivative is not applied). Lets losses like cross-entropy
/// feed the numerically stable logit-space gradient.
Grads backward_params_preact(const NetParams& params, const Cache& cache,
                             std::span<const double> out_grad);

/// Gradient of the scalar loss with respect to the network input.
std::vector<double> backward_input(const NetParams& params, const Cache& cache,
                                   std::span<const double> out_grad);

std::vector<double> backward_input_preact(const NetParams& params, const Cache& cache,
                                          std::span<const double> out_grad);

SgdState make_sgd_state(const NetParams& params, double lr, double momentum, double weight_decay);

/// v <- mu*v + g + lambda*w; w <- w - eta*v. Bumps the revision counter.
void sgd_step(NetParams& params, const Grads& grads, SgdState& state);

/// JSON object text holding spec, seed, and flat parameter arrays, suitable
/// both as a standalone record body and for embedding in model bundles.
std::string net_body_json(const NetParams& params);
NetParams net_from_json(const nlohmann::json& j, int lineno);

/// Versioned weight file: header line plus one net body line.
void save_net(const std::string& path, const NetParams& params);
NetParams load_net(const std::string& path);

}  // namespace egosynth::net
