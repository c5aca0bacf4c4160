#include "egosynth/runconfig.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"

namespace egosynth::run {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ParseError("config: " + msg, 0); }

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& known) {
    for (const auto& [key, _] : obj.items())
        if (!known.count(key)) bad("unknown key \"" + key + "\" in " + where);
}

double num(const json& obj, const std::string& where, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) bad(where + "." + key + " must be a number");
    return obj[key].get<double>();
}

long integer(const json& obj, const std::string& where, const std::string& key, long fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) bad(where + "." + key + " must be an integer");
    return obj[key].get<long>();
}

std::string text(const json& obj, const std::string& where, const std::string& key,
                 const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) bad(where + "." + key + " must be a string");
    return obj[key].get<std::string>();
}

void parse_sim(const json& j, sim::SimParams& p) {
    check_keys(j, "sim",
               {"court_x", "court_y", "basket", "min_length", "max_length", "count", "split",
                "head_min", "head_max", "deflection", "position_noise", "gaze_noise",
                "observation_noise", "d_obs", "seed"});
    p.court_x = num(j, "sim", "court_x", p.court_x);
    p.court_y = num(j, "sim", "court_y", p.court_y);
    if (j.contains("basket")) {
        const auto b = io::get_double_array(j, "basket", 3, 0);
        p.basket = {b[0], b[1], b[2]};
    }
    p.min_length = static_cast<int>(integer(j, "sim", "min_length", p.min_length));
    p.max_length = static_cast<int>(integer(j, "sim", "max_length", p.max_length));
    p.count = static_cast<int>(integer(j, "sim", "count", p.count));
    p.split = num(j, "sim", "split", p.split);
    p.head_min = num(j, "sim", "head_min", p.head_min);
    p.head_max = num(j, "sim", "head_max", p.head_max);
    p.deflection = num(j, "sim", "deflection", p.deflection);
    p.position_noise = num(j, "sim", "position_noise", p.position_noise);
    p.gaze_noise = num(j, "sim", "gaze_noise", p.gaze_noise);
    p.observation_noise = num(j, "sim", "observation_noise", p.observation_noise);
    p.d_obs = static_cast<int>(integer(j, "sim", "d_obs", p.d_obs));
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            bad("sim.seed must be an integer");
        p.seed = j["seed"].get<std::uint64_t>();
    }
}

void parse_train(const json& j, const std::string& where, model::TrainConfig& c) {
    check_keys(j, where, {"iterations", "lr", "momentum", "weight_decay", "batch", "seed"});
    c.iterations = integer(j, where, "iterations", c.iterations);
    c.lr = num(j, where, "lr", c.lr);
    c.momentum = num(j, where, "momentum", c.momentum);
    c.weight_decay = num(j, where, "weight_decay", c.weight_decay);
    c.batch = static_cast<int>(integer(j, where, "batch", c.batch));
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
}

json sim_json(const sim::SimParams& p) {
    json j;
    j["court_x"] = p.court_x;
    j["court_y"] = p.court_y;
    j["basket"] = {p.basket[0], p.basket[1], p.basket[2]};
    j["min_length"] = p.min_length;
    j["max_length"] = p.max_length;
    j["count"] = p.count;
    j["split"] = p.split;
    j["head_min"] = p.head_min;
    j["head_max"] = p.head_max;
    j["deflection"] = p.deflection;
    j["position_noise"] = p.position_noise;
    j["gaze_noise"] = p.gaze_noise;
    j["observation_noise"] = p.observation_noise;
    j["d_obs"] = p.d_obs;
    j["seed"] = p.seed;
    return j;
}

json train_json(const model::TrainConfig& c) {
    json j;
    j["iterations"] = c.iterations;
    j["lr"] = c.lr;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["batch"] = c.batch;
    j["seed"] = c.seed;
    return j;
}

}  // namespace

void RunConfig::validate() const {
    sim.validate();
    train_ego.validate();
    train_future.validate();
    train_verifier.validate();
    train_recurrent.validate();
    synthesis.validate(branches);
    if (seeds.empty()) throw ValidationError("config: seeds must be present");
    if (methods.empty()) throw ValidationError("config: methods must be nonempty");
    for (const auto& m : methods)
        if (std::find(eval::kAllMethods.begin(), eval::kAllMethods.end(), m) ==
            eval::kAllMethods.end())
            throw ValidationError("config: unknown method \"" + m + "\"");
    const std::set<std::string> dirs{data_dir, model_dir, synth_dir, report_dir};
    if (dirs.size() != 4 || dirs.count(""))
        throw ValidationError("config: output paths must be distinct and nonempty");
}

RunConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what(), 0);
    }
    if (!j.is_object()) bad("top level must be an object");
    check_keys(j, "top level",
               {"sim", "train", "branches", "synthesis", "seeds", "methods", "paths"});

    RunConfig rc;
    if (j.contains("sim")) parse_sim(j["sim"], rc.sim);
    if (j.contains("train")) {
        const auto& t = j["train"];
        check_keys(t, "train", {"ego", "future", "verifier", "recurrent"});
        if (t.contains("ego")) parse_train(t["ego"], "train.ego", rc.train_ego);
        if (t.contains("future")) parse_train(t["future"], "train.future", rc.train_future);
        if (t.contains("verifier")) parse_train(t["verifier"], "train.verifier", rc.train_verifier);
        if (t.contains("recurrent"))
            parse_train(t["recurrent"], "train.recurrent", rc.train_recurrent);
    }
    rc.branches = static_cast<int>(integer(j, "top level", "branches", rc.branches));
    if (j.contains("synthesis")) {
        const auto& s = j["synthesis"];
        check_keys(s, "synthesis", {"iterations", "step", "m_out"});
        rc.synthesis.iterations = integer(s, "synthesis", "iterations", rc.synthesis.iterations);
        rc.synthesis.step = num(s, "synthesis", "step", rc.synthesis.step);
        rc.synthesis.m_out = static_cast<int>(integer(s, "synthesis", "m_out", rc.synthesis.m_out));
    }
    if (j.contains("seeds")) {
        if (!j["seeds"].is_array()) bad("seeds must be an array");
        rc.seeds.clear();
        for (const auto& s : j["seeds"]) {
            if (!s.is_number_integer() && !s.is_number_unsigned()) bad("seeds must be integers");
            rc.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    if (j.contains("methods")) {
        if (!j["methods"].is_array()) bad("methods must be an array");
        rc.methods.clear();
        for (const auto& m : j["methods"]) {
            if (!m.is_string()) bad("methods must be strings");
            rc.methods.push_back(m.get<std::string>());
        }
    }
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        check_keys(p, "paths", {"data", "models", "generated", "report"});
        rc.data_dir = text(p, "paths", "data", rc.data_dir);
        rc.model_dir = text(p, "paths", "models", rc.model_dir);
        rc.synth_dir = text(p, "paths", "generated", rc.synth_dir);
        rc.report_dir = text(p, "paths", "report", rc.report_dir);
    }
    rc.validate();
    return rc;
}

std::string config_json(const RunConfig& rc) {
    json j;
    j["sim"] = sim_json(rc.sim);
    j["train"]["ego"] = train_json(rc.train_ego);
    j["train"]["future"] = train_json(rc.train_future);
    j["train"]["verifier"] = train_json(rc.train_verifier);
    j["train"]["recurrent"] = train_json(rc.train_recurrent);
    j["branches"] = rc.branches;
    j["synthesis"]["iterations"] = rc.synthesis.iterations;
    j["synthesis"]["step"] = rc.synthesis.step;
    j["synthesis"]["m_out"] = rc.synthesis.m_out;
    j["seeds"] = rc.seeds;
    j["methods"] = rc.methods;
    j["paths"]["data"] = rc.data_dir;
    j["paths"]["models"] = rc.model_dir;
    j["paths"]["generated"] = rc.synth_dir;
    j["paths"]["report"] = rc.report_dir;
    return j.dump(2) + "\n";
}

void save_config(const std::string& path, const RunConfig& rc) {
    io::write_file_atomic(path, config_json(rc));
}

}  // namespace egosynth::run
