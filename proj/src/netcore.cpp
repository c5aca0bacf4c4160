#include "egosynth/netcore.hpp"

#include <atomic>
#include <cmath>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"
#include "egosynth/rng.hpp"

namespace egosynth::net {

namespace {

std::atomic<std::uint64_t> g_next_uid{1};

double activate(Act a, double z) {
    switch (a) {
        case Act::Identity: return z;
        case Act::Tanh: return std::tanh(z);
        case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    throw ValidationError("unknown activation");
}

// Derivative written in terms of the activated output y.
double activate_deriv(Act a, double y) {
    switch (a) {
        case Act::Identity: return 1.0;
        case Act::Tanh: return 1.0 - y * y;
        case Act::Sigmoid: return y * (1.0 - y);
    }
    throw ValidationError("unknown activation");
}

void check_cache(const NetParams& params, const Cache& cache) {
    if (cache.uid != params.uid || cache.revision != params.revision)
        throw ValidationError("stale forward cache: parameters changed since the forward pass");
    if (cache.out.size() != params.spec.layer_count())
        throw ValidationError("cache does not match network depth");
}

// Shared backward chain. When from_preact is set, the output activation's
// derivative is skipped (out_grad already lives in logit space).
void backprop(const NetParams& params, const Cache& cache, std::span<const double> out_grad,
              bool from_preact, Grads* grads, std::vector<double>* input_grad) {
    check_cache(params, cache);
    const auto& spec = params.spec;
    const std::size_t layers = spec.layer_count();
    if (out_grad.size() != static_cast<std::size_t>(spec.output_size()))
        throw ValidationError("output gradient length mismatch");

    std::vector<double> delta(out_grad.begin(), out_grad.end());
    if (!from_preact) {
        const auto& y = cache.out[layers - 1];
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] *= activate_deriv(spec.acts[layers - 1], y[i]);
    }

    for (std::size_t l = layers; l-- > 0;) {
        const int rows = spec.sizes[l + 1];
        const int cols = spec.sizes[l];
        const std::vector<double>& x = l == 0 ? cache.input : cache.out[l - 1];
        if (grads) {
            auto& gw = grads->weights[l];
            auto& gb = grads->biases[l];
            for (int r = 0; r < rows; ++r) {
                const double d = delta[r];
                gb[r] += d;
                for (int c = 0; c < cols; ++c) gw[r * cols + c] += d * x[c];
            }
        }
        if (l == 0 && !input_grad) break;

        std::vector<double> prev(cols, 0.0);
        const auto& w = params.weights[l];
        for (int r = 0; r < rows; ++r) {
            const double d = delta[r];
            for (int c = 0; c < cols; ++c) prev[c] += w[r * cols + c] * d;
        }
        if (l == 0) {
            *input_grad = std::move(prev);
            return;
        }
        const auto& y = cache.out[l - 1];
        for (int c = 0; c < cols; ++c) prev[c] *= activate_deriv(spec.acts[l - 1], y[c]);
        delta = std::move(prev);
    }
}

}  // namespace

std::string act_name(Act a) {
    switch (a) {
        case Act::Identity: return "identity";
        case Act::Tanh: return "tanh";
        case Act::Sigmoid: return "sigmoid";
    }
    throw ValidationError("unknown activation");
}

Act act_from_name(const std::string& name) {
    if (name == "identity") return Act::Identity;
    if (name == "tanh") return Act::Tanh;
    if (name == "sigmoid") return Act::Sigmoid;
    throw ValidationError("unknown activation name: " + name);
}

void NetSpec::validate() const {
    if (sizes.size() < 2) throw ValidationError("network needs at least one layer");
    if (acts.size() != sizes.size() - 1)
        throw ValidationError("need exactly one activation per layer");
    for (int s : sizes)
        if (s <= 0) throw ValidationError("layer sizes must be positive");
}

std::size_t NetParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

bool NetParams::all_finite() const {
    for (const auto& w : weights)
        for (double x : w)
            if (!std::isfinite(x)) return false;
    for (const auto& b : biases)
        for (double x : b)
            if (!std::isfinite(x)) return false;
    return true;
}

NetParams net_init(const NetSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetParams p;
    p.spec = spec;
    p.seed = seed;
    p.uid = g_next_uid.fetch_add(1);
    Rng rng(seed);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const int fan_in = spec.sizes[l];
        const int fan_out = spec.sizes[l + 1];
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (double& x : w) x = rng.uniform(-a, a);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

Grads zero_grads(const NetParams& params) {
    Grads g;
    for (std::size_t l = 0; l < params.spec.layer_count(); ++l) {
        g.weights.emplace_back(params.weights[l].size(), 0.0);
        g.biases.emplace_back(params.biases[l].size(), 0.0);
    }
    return g;
}

void Grads::add(const Grads& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
        for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
    }
}

void Grads::scale(double s) {
    for (auto& w : weights)
        for (double& x : w) x *= s;
    for (auto& b : biases)
        for (double& x : b) x *= s;
}

std::vector<double> forward(const NetParams& params, std::span<const double> input, Cache* cache) {
    const auto& spec = params.spec;
    if (input.size() != static_cast<std::size_t>(spec.input_size()))
        throw ValidationError("input length mismatch: got " + std::to_string(input.size()) +
                              ", want " + std::to_string(spec.input_size()));
    if (cache) {
        cache->uid = params.uid;
        cache->revision = params.revision;
        cache->input.assign(input.begin(), input.end());
        cache->pre.clear();
        cache->out.clear();
    }
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const int rows = spec.sizes[l + 1];
        const int cols = spec.sizes[l];
        const auto& w = params.weights[l];
        const auto& b = params.biases[l];
        std::vector<double> z(rows);
        for (int r = 0; r < rows; ++r) {
            double s = b[r];
            for (int c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
            z[r] = s;
        }
        std::vector<double> y(rows);
        for (int r = 0; r < rows; ++r) y[r] = activate(spec.acts[l], z[r]);
        if (cache) {
            cache->pre.push_back(z);
            cache->out.push_back(y);
        }
        x = std::move(y);
    }
    return x;
}

Grads backward_params(const NetParams& params, const Cache& cache,
                      std::span<const double> out_grad) {
    Grads g = zero_grads(params);
    backprop(params, cache, out_grad, false, &g, nullptr);
    return g;
}

Grads backward_params_preact(const NetParams& params, const Cache& cache,
                             std::span<const double> out_grad) {
    Grads g = zero_grads(params);
    backprop(params, cache, out_grad, true, &g, nullptr);
    return g;
}

std::vector<double> backward_input(const NetParams& params, const Cache& cache,
                                   std::span<const double> out_grad) {
    std::vector<double> g;
    backprop(params, cache, out_grad, false, nullptr, &g);
    return g;
}

std::vector<double> backward_input_preact(const NetParams& params, const Cache& cache,
                                          std::span<const double> out_grad) {
    std::vector<double> g;
    backprop(params, cache, out_grad, true, nullptr, &g);
    return g;
}

SgdState make_sgd_state(const NetParams& params, double lr, double momentum, double weight_decay) {
    if (lr <= 0.0) throw ValidationError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ValidationError("weight decay must be non-negative");
    SgdState s;
    s.lr = lr;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    for (std::size_t l = 0; l < params.spec.layer_count(); ++l) {
        s.vel_weights.emplace_back(params.weights[l].size(), 0.0);
        s.vel_biases.emplace_back(params.biases[l].size(), 0.0);
    }
    return s;
}

void sgd_step(NetParams& params, const Grads& grads, SgdState& state) {
    if (grads.weights.size() != params.weights.size() ||
        state.vel_weights.size() != params.weights.size())
        throw ValidationError("gradient/state shape mismatch");
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        if (grads.weights[l].size() != params.weights[l].size() ||
            grads.biases[l].size() != params.biases[l].size())
            throw ValidationError("gradient shape mismatch at layer " + std::to_string(l));
        auto& w = params.weights[l];
        auto& vw = state.vel_weights[l];
        const auto& gw = grads.weights[l];
        for (std::size_t i = 0; i < w.size(); ++i) {
            vw[i] = state.momentum * vw[i] + gw[i] + state.weight_decay * w[i];
            w[i] -= state.lr * vw[i];
        }
        auto& b = params.biases[l];
        auto& vb = state.vel_biases[l];
        const auto& gb = grads.biases[l];
        for (std::size_t i = 0; i < b.size(); ++i) {
            vb[i] = state.momentum * vb[i] + gb[i] + state.weight_decay * b[i];
            b[i] -= state.lr * vb[i];
        }
    }
    ++params.revision;
}

std::string net_body_json(const NetParams& params) {
    std::string s = "{\"sizes\":[";
    for (std::size_t i = 0; i < params.spec.sizes.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(params.spec.sizes[i]);
    }
    s += "],\"activations\":[";
    for (std::size_t i = 0; i < params.spec.acts.size(); ++i) {
        if (i) s += ',';
        s += '"' + act_name(params.spec.acts[i]) + '"';
    }
    s += "],\"seed\":" + std::to_string(params.seed);
    s += ",\"weights\":[";
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        if (l) s += ',';
        s += io::format_array(params.weights[l]);
    }
    s += "],\"biases\":[";
    for (std::size_t l = 0; l < params.biases.size(); ++l) {
        if (l) s += ',';
        s += io::format_array(params.biases[l]);
    }
    s += "]}";
    return s;
}

NetParams net_from_json(const nlohmann::json& j, int lineno) {
    if (!j.is_object() || !j.contains("sizes") || !j.contains("activations") ||
        !j.contains("weights") || !j.contains("biases"))
        throw ParseError("incomplete network record", lineno);

    NetSpec spec;
    for (const auto& v : j["sizes"]) {
        if (!v.is_number_integer()) throw ParseError("non-integer layer size", lineno);
        spec.sizes.push_back(v.get<int>());
    }
    for (const auto& v : j["activations"]) {
        if (!v.is_string()) throw ParseError("non-string activation", lineno);
        try {
            spec.acts.push_back(act_from_name(v.get<std::string>()));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), lineno);
    }

    NetParams p;
    p.spec = spec;
    p.seed = j.value("seed", std::uint64_t{0});
    p.uid = g_next_uid.fetch_add(1);
    const auto& jw = j["weights"];
    const auto& jb = j["biases"];
    if (jw.size() != spec.layer_count() || jb.size() != spec.layer_count())
        throw ParseError("layer count mismatch between sizes and parameter arrays", lineno);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t want_w =
            static_cast<std::size_t>(spec.sizes[l]) * static_cast<std::size_t>(spec.sizes[l + 1]);
        const std::size_t want_b = static_cast<std::size_t>(spec.sizes[l + 1]);
        if (!jw[l].is_array() || jw[l].size() != want_w)
            throw ParseError("weight array shape mismatch at layer " + std::to_string(l), lineno);
        if (!jb[l].is_array() || jb[l].size() != want_b)
            throw ParseError("bias array shape mismatch at layer " + std::to_string(l), lineno);
        std::vector<double> w, b;
        w.reserve(want_w);
        b.reserve(want_b);
        for (const auto& v : jw[l]) {
            if (!v.is_number()) throw ParseError("non-numeric weight", lineno);
            w.push_back(v.get<double>());
        }
        for (const auto& v : jb[l]) {
            if (!v.is_number()) throw ParseError("non-numeric bias", lineno);
            b.push_back(v.get<double>());
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    if (!p.all_finite()) throw ParseError("non-finite parameter value", lineno);
    return p;
}

void save_net(const std::string& path, const NetParams& params) {
    std::string content = io::header_line("egosynth-net", 1) + "\n" + net_body_json(params) + "\n";
    io::write_file_atomic(path, content);
}

NetParams load_net(const std::string& path) {
    const auto lines = io::split_lines(io::read_file(path));
    if (lines.empty() || lines[0].empty()) throw ParseError("missing header", 1);
    io::expect_header(io::parse_line(lines[0], 1), "egosynth-net", 1, 1);
    if (lines.size() < 2 || lines[1].empty()) throw ParseError("missing network record", 2);
    return net_from_json(io::parse_line(lines[1], 2), 2);
}

}  // namespace egosynth::net
