#include "egosynth/models.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"
#include "egosynth/linalg.hpp"

#include "bundle_format.hpp"

namespace egosynth::model {

namespace {

using geom::CameraConfig;
using sim::Dataset;
using sim::Observation;

double softplus(double x) { return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0); }

struct FrameRef {
    int seq;
    int frame;  // 0-based index into configs/observations
};

std::vector<FrameRef> all_train_frames(const Dataset& ds) {
    std::vector<FrameRef> frames;
    for (std::size_t s = 0; s < ds.train.size(); ++s)
        for (std::size_t f = 0; f < ds.train[s].seq.configs.size(); ++f)
            frames.push_back({static_cast<int>(s), static_cast<int>(f)});
    return frames;
}

std::vector<double> normalized_target(const Dataset& ds, const FrameRef& f) {
    const CameraConfig n = geom::normalize(ds.train[f.seq].seq.configs[f.frame], ds.normalizer);
    return std::vector<double>(n.v.begin(), n.v.end());
}

std::string transform_json(const InputTransform& t) {
    return "{\"mean\":" + io::format_array(t.mean) + ",\"proj\":" + io::format_array(t.proj) + "}";
}

InputTransform transform_from_json(const nlohmann::json& j, int lineno) {
    if (!j.is_object()) throw ParseError("missing input transform", lineno);
    InputTransform t;
    t.mean = io::get_double_array(j, "mean", 0, lineno);
    t.proj = io::get_double_array(j, "proj", t.mean.size() * t.mean.size(), lineno);
    return t;
}

}  // namespace

InputTransform fit_whitening(const std::vector<const Observation*>& samples) {
    if (samples.empty()) throw ValidationError("cannot fit a whitening transform on no samples");
    const std::size_t d = samples.front()->size();
    for (const auto* s : samples)
        if (s->size() != d) throw ValidationError("observation dimension mismatch");

    InputTransform t;
    t.mean.assign(d, 0.0);
    const double n = static_cast<double>(samples.size());
    for (const auto* s : samples)
        for (std::size_t i = 0; i < d; ++i) t.mean[i] += (*s)[i];
    for (double& m : t.mean) m /= n;

    std::vector<double> cov(d * d, 0.0);
    std::vector<double> centered(d);
    for (const auto* s : samples) {
        for (std::size_t i = 0; i < d; ++i) centered[i] = (*s)[i] - t.mean[i];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) cov[i * d + j] += centered[i] * centered[j];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i * d + j] /= n;
            cov[j * d + i] = cov[i * d + j];
        }

    std::vector<double> eigvals, eigvecs;
    linalg::eigen_symmetric(d, cov, eigvals, eigvecs);

    const double eps = 1e-12 * std::max(eigvals.empty() ? 0.0 : eigvals[0], 1.0);
    t.proj.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double scale = eigvals[i] > eps ? 1.0 / std::sqrt(eigvals[i]) : 0.0;
        for (std::size_t j = 0; j < d; ++j) t.proj[i * d + j] = scale * eigvecs[i * d + j];
    }
    return t;
}

std::vector<double> apply_transform(const InputTransform& t, std::span<const double> x) {
    const std::size_t d = t.dim();
    if (x.size() != d) throw ValidationError("input dimension does not match transform");
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += t.proj[i * d + j] * (x[j] - t.mean[j]);
        out[i] = s;
    }
    return out;
}

void TrainConfig::validate() const {
    if (iterations <= 0) throw ValidationError("iterations must be positive");
    if (lr <= 0.0) throw ValidationError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ValidationError("weight decay must be non-negative");
    if (batch <= 0) throw ValidationError("batch size must be positive");
}

std::pair<double, double> branch_interval(int j, int k) {
    if (k < 1) throw ValidationError("branch count must be at least 1");
    if (j < 1 || j > k) throw ValidationError("branch index out of range");
    return {static_cast<double>(j - 1) / k, static_cast<double>(j) / k};
}

int branch_of(double s, int k) {
    if (k < 1) throw ValidationError("branch count must be at least 1");
    if (s < 0.0 || s > 1.0) throw ValidationError("normalized time outside [0,1]");
    for (int j = 1; j < k; ++j)
        if (s <= static_cast<double>(j) / k) return j;
    return k;
}

int goal_label(double s) {
    if (s < 0.0 || s > 1.0) throw ValidationError("normalized time outside [0,1]");
    return s > 0.92 ? 1 : 0;
}

EgoEncoder train_ego_encoder(const Dataset& ds, const TrainConfig& cfg,
                             std::vector<double>* loss_log) {
    cfg.validate();
    if (ds.train.empty()) throw ValidationError("cannot train on an empty dataset");
    const std::vector<FrameRef> frames = all_train_frames(ds);

    EgoEncoder enc;
    enc.dataset_id = ds.id;
    std::vector<const Observation*> obs_ptrs;
    for (const auto& rec : ds.train)
        for (const auto& o : rec.observations) obs_ptrs.push_back(&o);
    enc.input = fit_whitening(obs_ptrs);

    // The observation already exposes pose features, so the encoder is the
    // whitened linear readout; a tanh hidden layer only slows convergence to
    // the same map at the fixed training budget.
    const net::NetSpec spec{{ds.params.d_obs, 12}, {net::Act::Identity}};
    enc.net = net::net_init(spec, derive_seed(cfg.seed, 0xE60));
    net::SgdState sgd = net::make_sgd_state(enc.net, cfg.lr, cfg.momentum, cfg.weight_decay);

    Rng rng(cfg.seed);
    std::vector<double> local_log;
    std::vector<double>& log = loss_log ? *loss_log : local_log;
    log.reserve(log.size() + cfg.iterations);

    for (long iter = 0; iter < cfg.iterations; ++iter) {
        net::Grads grads = net::zero_grads(enc.net);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const FrameRef f = frames[rng.index(frames.size())];
            const auto x = apply_transform(enc.input, ds.train[f.seq].observations[f.frame]);
            const auto y = normalized_target(ds, f);
            net::Cache cache;
            const auto out = net::forward(enc.net, x, &cache);
            std::vector<double> og(12);
            for (int i = 0; i < 12; ++i) {
                const double e = out[i] - y[i];
                batch_loss += e * e;
                og[i] = 2.0 * e / cfg.batch;
            }
            grads.add(net::backward_params(enc.net, cache, og));
        }
        log.push_back(batch_loss / cfg.batch);
        net::sgd_step(enc.net, grads, sgd);
    }
    detail::finish_losses(log, &enc.initial_loss, &enc.final_loss);
    return enc;
}

CameraConfig encode(const EgoEncoder& encoder, const Observation& o) {
    const auto out = net::forward(encoder.net, apply_transform(encoder.input, o));
    CameraConfig c;
    for (int i = 0; i < 12; ++i) c[i] = out[i];
    return c;
}

FuturePredictor train_future(const Dataset& ds, int k, const TrainConfig& cfg,
                             std::vector<double>* loss_log) {
    cfg.validate();
    if (k < 1) throw ValidationError("branch count must be at least 1");
    if (ds.train.empty()) throw ValidationError("cannot train on an empty dataset");

    // Anchor frames are those with s(i) <= 0.1, so sequences shorter than 10
    // frames contribute nothing and are skipped.
    struct Eligible {
        int seq;
        std::vector<int> anchors;                 // 1-based frame indices
        std::vector<std::vector<int>> by_branch;  // per branch, 1-based
    };
    std::vector<Eligible> eligible;
    std::vector<const Observation*> anchor_obs;
    for (std::size_t s = 0; s < ds.train.size(); ++s) {
        const int m = static_cast<int>(ds.train[s].seq.configs.size());
        if (m < 10) {
            std::cerr << "warning: sequence " << ds.train[s].seq.id
                      << " is too short for an anchor frame, skipping\n";
            continue;
        }
        Eligible e;
        e.seq = static_cast<int>(s);
        for (int i = 1; i * 10 <= m; ++i) e.anchors.push_back(i);
        e.by_branch.assign(k + 1, {});
        for (int i = 1; i <= m; ++i)
            e.by_branch[branch_of(sim::normalized_time(i, m), k)].push_back(i);
        bool full = !e.anchors.empty();
        for (int j = 1; j <= k; ++j) full = full && !e.by_branch[j].empty();
        if (!full) {
            std::cerr << "warning: sequence " << ds.train[s].seq.id
                      << " leaves a branch interval empty, skipping\n";
            continue;
        }
        for (int i : e.anchors) anchor_obs.push_back(&ds.train[s].observations[i - 1]);
        eligible.push_back(std::move(e));
    }
    if (eligible.empty()) throw ValidationError("no sequence is long enough to train on");

    FuturePredictor fp;
    fp.dataset_id = ds.id;
    fp.input = fit_whitening(anchor_obs);
    const net::NetSpec trunk_spec{{ds.params.d_obs, 64, 64}, {net::Act::Tanh, net::Act::Tanh}};
    fp.trunk = net::net_init(trunk_spec, derive_seed(cfg.seed, 0xF00));
    const net::NetSpec branch_spec{{64, 12}, {net::Act::Identity}};
    for (int j = 1; j <= k; ++j)
        fp.branches.push_back(net::net_init(branch_spec, derive_seed(cfg.seed, 0xF00 + j)));

    net::SgdState trunk_sgd = net::make_sgd_state(fp.trunk, cfg.lr, cfg.momentum, cfg.weight_decay);
    std::vector<net::SgdState> branch_sgd;
    for (auto& b : fp.branches)
        branch_sgd.push_back(net::make_sgd_state(b, cfg.lr, cfg.momentum, cfg.weight_decay));

    Rng rng(cfg.seed);
    std::vector<double> local_log;
    std::vector<double>& log = loss_log ? *loss_log : local_log;
    log.reserve(log.size() + cfg.iterations);

    for (long iter = 0; iter < cfg.iterations; ++iter) {
        net::Grads trunk_grads = net::zero_grads(fp.trunk);
        std::vector<net::Grads> bgrads;
        for (auto& b : fp.branches) bgrads.push_back(net::zero_grads(b));
        double batch_loss = 0.0;

        for (int b = 0; b < cfg.batch; ++b) {
            const Eligible& e = eligible[rng.index(eligible.size())];
            const int anchor = e.anchors[rng.index(e.anchors.size())];
            const auto x = apply_transform(fp.input, ds.train[e.seq].observations[anchor - 1]);

            net::Cache trunk_cache;
            const auto hidden = net::forward(fp.trunk, x, &trunk_cache);
            std::vector<double> hidden_grad(hidden.size(), 0.0);

            for (int j = 1; j <= k; ++j) {
                const auto& pool = e.by_branch[j];
                const int target = pool[rng.index(pool.size())];
                const auto y = normalized_target(ds, {e.seq, target - 1});
                net::Cache bcache;
                const auto out = net::forward(fp.branches[j - 1], hidden, &bcache);
                std::vector<double> og(12);
                for (int i = 0; i < 12; ++i) {
                    const double err = out[i] - y[i];
                    batch_loss += err * err;
                    og[i] = 2.0 * err / cfg.batch;
                }
                bgrads[j - 1].add(net::backward_params(fp.branches[j - 1], bcache, og));
                const auto hg = net::backward_input(fp.branches[j - 1], bcache, og);
                for (std::size_t i = 0; i < hidden_grad.size(); ++i) hidden_grad[i] += hg[i];
            }
            trunk_grads.add(net::backward_params(fp.trunk, trunk_cache, hidden_grad));
        }
        log.push_back(batch_loss / cfg.batch);
        net::sgd_step(fp.trunk, trunk_grads, trunk_sgd);
        for (int j = 0; j < k; ++j) net::sgd_step(fp.branches[j], bgrads[j], branch_sgd[j]);
    }
    detail::finish_losses(log, &fp.initial_loss, &fp.final_loss);
    return fp;
}

std::vector<CameraConfig> predict_future(const FuturePredictor& predictor, const Observation& o) {
    const auto hidden = net::forward(predictor.trunk, apply_transform(predictor.input, o));
    std::vector<CameraConfig> out;
    out.reserve(predictor.branches.size());
    for (const auto& branch : predictor.branches) {
        const auto v = net::forward(branch, hidden);
        CameraConfig c;
        for (int i = 0; i < 12; ++i) c[i] = v[i];
        out.push_back(c);
    }
    return out;
}

GoalVerifier train_goal_verifier(const Dataset& ds, const TrainConfig& cfg,
                                 std::vector<double>* loss_log) {
    cfg.validate();
    if (ds.train.empty()) throw ValidationError("cannot train on an empty dataset");

    std::vector<FrameRef> positives, negatives;
    for (std::size_t s = 0; s < ds.train.size(); ++s) {
        const int m = static_cast<int>(ds.train[s].seq.configs.size());
        for (int i = 1; i <= m; ++i) {
            const FrameRef f{static_cast<int>(s), i - 1};
            if (goal_label(sim::normalized_time(i, m)) == 1)
                positives.push_back(f);
            else
                negatives.push_back(f);
        }
    }
    if (positives.empty() || negatives.empty())
        throw ValidationError("goal verifier needs both label classes in the training data");

    GoalVerifier gv;
    gv.dataset_id = ds.id;
    const net::NetSpec spec{{12, 100, 1}, {net::Act::Tanh, net::Act::Sigmoid}};
    gv.net = net::net_init(spec, derive_seed(cfg.seed, 0x6F));
    net::SgdState sgd = net::make_sgd_state(gv.net, cfg.lr, cfg.momentum, cfg.weight_decay);

    Rng rng(cfg.seed);
    std::vector<double> local_log;
    std::vector<double>& log = loss_log ? *loss_log : local_log;
    log.reserve(log.size() + cfg.iterations);

    const int npos = cfg.batch / 2;
    for (long iter = 0; iter < cfg.iterations; ++iter) {
        net::Grads grads = net::zero_grads(gv.net);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const bool positive = b < npos;
            const auto& pool = positive ? positives : negatives;
            const FrameRef f = pool[rng.index(pool.size())];
            const auto x = normalized_target(ds, f);
            net::Cache cache;
            const auto out = net::forward(gv.net, x, &cache);
            const double z = cache.pre.back()[0];
            batch_loss += positive ? softplus(-z) : softplus(z);
            const std::vector<double> dz{(out[0] - (positive ? 1.0 : 0.0)) / cfg.batch};
            grads.add(net::backward_params_preact(gv.net, cache, dz));
        }
        log.push_back(batch_loss / cfg.batch);
        net::sgd_step(gv.net, grads, sgd);
    }
    detail::finish_losses(log, &gv.initial_loss, &gv.final_loss);
    return gv;
}

double verify(const GoalVerifier& verifier, const CameraConfig& h) {
    if (!geom::all_finite(h)) throw ValidationError("non-finite configuration");
    const auto out = net::forward(verifier.net, h.v);
    return std::clamp(out[0], 1e-12, 1.0 - 1e-12);
}

std::array<double, 12> verify_grad(const GoalVerifier& verifier, const CameraConfig& h) {
    if (!geom::all_finite(h)) throw ValidationError("non-finite configuration");
    net::Cache cache;
    net::forward(verifier.net, h.v, &cache);
    const auto g = net::backward_input(verifier.net, cache, std::vector<double>{1.0});
    std::array<double, 12> out;
    std::copy(g.begin(), g.end(), out.begin());
    return out;
}

double verifier_log_score(const GoalVerifier& verifier, const CameraConfig& h,
                          std::array<double, 12>* grad) {
    if (!geom::all_finite(h)) throw ValidationError("non-finite configuration");
    net::Cache cache;
    const auto out = net::forward(verifier.net, h.v, &cache);
    const double z = cache.pre.back()[0];
    if (grad) {
        const auto g =
            net::backward_input_preact(verifier.net, cache, std::vector<double>{1.0 - out[0]});
        std::copy(g.begin(), g.end(), grad->begin());
    }
    return -softplus(-z);
}

void save_ego(const std::string& path, const EgoEncoder& encoder) {
    std::string body = detail::bundle_prefix("ego", encoder.dataset_id, encoder.initial_loss,
                                     encoder.final_loss);
    body += ",\"input_transform\":" + transform_json(encoder.input);
    body += ",\"net\":" + net::net_body_json(encoder.net) + "}";
    detail::write_bundle(path, body);
}

EgoEncoder load_ego(const std::string& path) {
    const nlohmann::json j = detail::read_bundle(path, "ego");
    EgoEncoder enc;
    enc.dataset_id = j.value("dataset_id", std::string{});
    enc.initial_loss = j.value("initial_loss", 0.0);
    enc.final_loss = j.value("final_loss", 0.0);
    enc.input = transform_from_json(j.contains("input_transform") ? j["input_transform"]
                                                                  : nlohmann::json{},
                                    2);
    enc.net = net::net_from_json(j.contains("net") ? j["net"] : nlohmann::json{}, 2);
    if (enc.net.spec.output_size() != 12) throw ParseError("encoder output size must be 12", 2);
    return enc;
}

void save_future(const std::string& path, const FuturePredictor& predictor) {
    std::string body = detail::bundle_prefix("future", predictor.dataset_id, predictor.initial_loss,
                                     predictor.final_loss);
    body += ",\"k\":" + std::to_string(predictor.k());
    body += ",\"input_transform\":" + transform_json(predictor.input);
    body += ",\"trunk\":" + net::net_body_json(predictor.trunk);
    body += ",\"branches\":[";
    for (int j = 0; j < predictor.k(); ++j) {
        if (j) body += ',';
        body += net::net_body_json(predictor.branches[j]);
    }
    body += "]}";
    detail::write_bundle(path, body);
}

FuturePredictor load_future(const std::string& path) {
    const nlohmann::json j = detail::read_bundle(path, "future");
    FuturePredictor fp;
    fp.dataset_id = j.value("dataset_id", std::string{});
    fp.initial_loss = j.value("initial_loss", 0.0);
    fp.final_loss = j.value("final_loss", 0.0);
    fp.input = transform_from_json(j.contains("input_transform") ? j["input_transform"]
                                                                 : nlohmann::json{},
                                   2);
    fp.trunk = net::net_from_json(j.contains("trunk") ? j["trunk"] : nlohmann::json{}, 2);
    if (!j.contains("branches") || !j["branches"].is_array() || j["branches"].empty())
        throw ParseError("future bundle needs branch networks", 2);
    for (const auto& b : j["branches"]) {
        fp.branches.push_back(net::net_from_json(b, 2));
        if (fp.branches.back().spec.output_size() != 12)
            throw ParseError("branch output size must be 12", 2);
    }
    if (j.contains("k") && j["k"].get<int>() != fp.k())
        throw ParseError("branch count does not match k", 2);
    return fp;
}

void save_verifier(const std::string& path, const GoalVerifier& verifier) {
    std::string body = detail::bundle_prefix("verifier", verifier.dataset_id, verifier.initial_loss,
                                     verifier.final_loss);
    body += ",\"net\":" + net::net_body_json(verifier.net) + "}";
    detail::write_bundle(path, body);
}

GoalVerifier load_verifier(const std::string& path) {
    const nlohmann::json j = detail::read_bundle(path, "verifier");
    GoalVerifier gv;
    gv.dataset_id = j.value("dataset_id", std::string{});
    gv.initial_loss = j.value("initial_loss", 0.0);
    gv.final_loss = j.value("final_loss", 0.0);
    gv.net = net::net_from_json(j.contains("net") ? j["net"] : nlohmann::json{}, 2);
    if (gv.net.spec.input_size() != 12 || gv.net.spec.output_size() != 1)
        throw ParseError("verifier must map 12 inputs to 1 output", 2);
    return gv;
}

}  // namespace egosynth::model
