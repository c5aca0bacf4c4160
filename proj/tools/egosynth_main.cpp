#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "egosynth/errors.hpp"
#include "egosynth/evaluation.hpp"
#include "egosynth/jsonio.hpp"
#include "egosynth/models.hpp"
#include "egosynth/runconfig.hpp"
#include "egosynth/simcourt.hpp"
#include "egosynth/svgplot.hpp"
#include "egosynth/synthesis.hpp"

namespace fs = std::filesystem;
using namespace egosynth;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "run configuration file (JSON)");
    cmd->add_option("--out", c.out_dir, "output root directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "override the command's primary seed");
}

run::RunConfig load_cfg(const Common& c) {
    if (c.config_path.empty()) {
        run::RunConfig rc;
        rc.validate();
        return rc;
    }
    return run::load_config(c.config_path);
}

fs::path resolve(const Common& c, const std::string& leaf) {
    const fs::path p{leaf};
    return p.is_absolute() ? p : fs::path(c.out_dir) / p;
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::string out = "iteration,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += io::format_double(losses[i]);
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

int cmd_gen(const Common& c) {
    run::RunConfig rc = load_cfg(c);
    if (c.seed) rc.sim.seed = *c.seed;

    const sim::Dataset ds = sim::generate_dataset(rc.sim);
    const fs::path dir = resolve(c, rc.data_dir);
    fs::create_directories(dir);
    sim::save_sequences(dir.string(), ds);

    std::printf("dataset %s: %zu train + %zu test sequences, d_obs %d\n", ds.id.c_str(),
                ds.train.size(), ds.test.size(), rc.sim.d_obs);
    std::map<std::size_t, int> lengths;
    for (const auto* part : {&ds.train, &ds.test})
        for (const auto& rec : *part) ++lengths[rec.seq.configs.size()];
    std::printf("length histogram:");
    for (const auto& [len, n] : lengths) std::printf(" %zu:%d", len, n);
    std::printf("\nstart-cell coverage %.3f\n", sim::start_cell_coverage(ds));
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_train(const Common& c, const std::string& which) {
    run::RunConfig rc = load_cfg(c);
    const sim::Dataset ds = sim::load_sequences(resolve(c, rc.data_dir).string());
    const fs::path dir = resolve(c, rc.model_dir);
    fs::create_directories(dir);

    const auto report = [&dir](const std::string& name, double initial, double final_loss) {
        std::printf("%s: loss %.4f -> %.4f, wrote %s\n", name.c_str(), initial, final_loss,
                    (dir / (name + ".json")).string().c_str());
    };
    const bool all = which == "all";

    if (all || which == "ego") {
        model::TrainConfig cfg = rc.train_ego;
        if (c.seed) cfg.seed = *c.seed;
        std::vector<double> log;
        const auto enc = model::train_ego_encoder(ds, cfg, &log);
        model::save_ego((dir / "ego.json").string(), enc);
        write_loss_csv((dir / "train_log_ego.csv").string(), log);
        report("ego", enc.initial_loss, enc.final_loss);
    }
    if (all || which == "future") {
        model::TrainConfig cfg = rc.train_future;
        if (c.seed) cfg.seed = *c.seed;
        std::vector<double> log;
        const auto fut = model::train_future(ds, rc.branches, cfg, &log);
        model::save_future((dir / "future.json").string(), fut);
        write_loss_csv((dir / "train_log_future.csv").string(), log);
        report("future", fut.initial_loss, fut.final_loss);
    }
    if (all || which == "verifier") {
        model::TrainConfig cfg = rc.train_verifier;
        if (c.seed) cfg.seed = *c.seed;
        std::vector<double> log;
        const auto ver = model::train_goal_verifier(ds, cfg, &log);
        model::save_verifier((dir / "verifier.json").string(), ver);
        write_loss_csv((dir / "train_log_verifier.csv").string(), log);
        report("verifier", ver.initial_loss, ver.final_loss);
    }
    if (all || which == "recurrent") {
        model::TrainConfig cfg = rc.train_recurrent;
        if (c.seed) cfg.seed = *c.seed;
        std::vector<double> log;
        const auto rec = eval::train_recurrent(ds, cfg, &log);
        eval::save_recurrent((dir / "recurrent.json").string(), rec);
        write_loss_csv((dir / "train_log_recurrent.csv").string(), log);
        report("recurrent", rec.initial_loss, rec.final_loss);
    }
    return 0;
}

int cmd_synth(const Common& c, const std::string& only_id, bool no_verifier, bool dump_traces) {
    run::RunConfig rc = load_cfg(c);
    const sim::Dataset ds = sim::load_sequences(resolve(c, rc.data_dir).string());
    const fs::path models = resolve(c, rc.model_dir);
    const auto enc = model::load_ego((models / "ego.json").string());
    const auto fut = model::load_future((models / "future.json").string());
    model::GoalVerifier ver;
    if (!no_verifier) ver = model::load_verifier((models / "verifier.json").string());

    std::vector<const sim::SeqRecord*> targets;
    for (const auto& rec : ds.test)
        if (only_id.empty() || rec.seq.id == only_id) targets.push_back(&rec);
    if (targets.empty()) throw ValidationError("no test sequence with id \"" + only_id + "\"");

    const fs::path dir = resolve(c, rc.synth_dir);
    fs::create_directories(dir);

    std::vector<sim::SeqRecord> generated;
    for (const sim::SeqRecord* rec : targets) {
        try {
            const auto start = model::encode(enc, rec->observations.at(0));
            const auto phis = model::predict_future(fut, rec->observations.at(0));
            const auto trace =
                synth::synthesize(start, phis, no_verifier ? nullptr : &ver, rc.synthesis);
            sim::SeqRecord out;
            out.seq = synth::extract_sequence(trace, rc.synthesis.m_out, ds.normalizer,
                                              rec->seq.id + "-gen");
            generated.push_back(std::move(out));
            if (dump_traces)
                synth::save_trace((dir / ("trace_" + rec->seq.id + ".jsonl")).string(), trace);
        } catch (const DivergenceError& e) {
            std::cerr << "synthesis diverged on " << rec->seq.id << ": " << e.what() << "\n";
            return 1;
        }
    }

    std::string name = no_verifier ? "generated_noverifier" : "generated";
    if (!only_id.empty()) name += "_" + only_id;
    const fs::path file = dir / (name + ".jsonl");
    sim::save_sequence_file(file.string(), generated);
    std::printf("synthesized %zu sequence%s, wrote %s\n", generated.size(),
                generated.size() == 1 ? "" : "s", file.string().c_str());
    return 0;
}

int cmd_eval(const Common& c, bool assert_orderings) {
    run::RunConfig rc = load_cfg(c);
    const sim::Dataset ds = sim::load_sequences(resolve(c, rc.data_dir).string());

    eval::BenchTrainConfigs cfgs;
    cfgs.ego = rc.train_ego;
    cfgs.future = rc.train_future;
    cfgs.verifier = rc.train_verifier;
    cfgs.recurrent = rc.train_recurrent;
    cfgs.branches = rc.branches;
    std::vector<std::uint64_t> seeds = c.seed ? std::vector<std::uint64_t>{*c.seed} : rc.seeds;

    const eval::MetricReport report =
        eval::run_benchmark(ds, rc.methods, seeds, cfgs, rc.synthesis);

    const fs::path dir = resolve(c, rc.report_dir);
    fs::create_directories(dir);
    eval::save_report((dir / "report.txt").string(), (dir / "report_detail.jsonl").string(),
                      report);
    std::fputs(eval::format_report(report).c_str(), stdout);
    std::printf("wrote %s\n", (dir / "report.txt").string().c_str());

    if (assert_orderings) {
        const auto violations = eval::check_orderings(report);
        for (const auto& v : violations) std::cerr << "ordering violated: " << v << "\n";
        if (!violations.empty()) return 1;
        std::printf("all orderings hold\n");
    }
    return 0;
}

int cmd_render(const Common& c, const std::vector<std::string>& files, const std::string& mode,
               const std::string& svg_name) {
    run::RunConfig rc = load_cfg(c);
    std::vector<sim::Sequence> seqs;
    for (const auto& file : files) {
        try {
            for (auto& rec : sim::load_sequence_file(file, 0)) seqs.push_back(std::move(rec.seq));
        } catch (const Error& e) {
            std::cerr << "render: " << file << ": " << e.what() << "\n";
            return 2;
        }
    }
    const auto plot_mode = mode == "scatter" ? svg::PlotMode::Scatter : svg::PlotMode::Path;
    const std::string svg = svg::render_svg(seqs, rc.sim, plot_mode);

    fs::create_directories(c.out_dir);
    const fs::path file = fs::path(c.out_dir) / svg_name;
    io::write_file_atomic(file.string(), svg);
    std::printf("rendered %zu sequence%s to %s\n", seqs.size(), seqs.size() == 1 ? "" : "s",
                file.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"basketball drive simulation, training, and camera-motion synthesis"};
    app.require_subcommand(1);

    Common gen_args, train_args, synth_args, eval_args, render_args;
    std::string which = "all";
    std::string only_id;
    bool no_verifier = false, dump_traces = false, assert_orderings = false;
    std::vector<std::string> render_files;
    std::string render_mode = "path", svg_name = "render.svg";

    CLI::App* gen = app.add_subcommand("gen", "generate the synthetic dataset");
    add_common(gen, gen_args);

    CLI::App* train = app.add_subcommand("train", "train model bundles from the dataset");
    add_common(train, train_args);
    train->add_option("--which", which, "ego|future|verifier|recurrent|all")
        ->check(CLI::IsMember({"ego", "future", "verifier", "recurrent", "all"}))
        ->capture_default_str();

    CLI::App* synth = app.add_subcommand("synth", "synthesize sequences from test-set starts");
    add_common(synth, synth_args);
    synth->add_option("--id", only_id, "synthesize one test sequence instead of all");
    synth->add_flag("--no-verifier", no_verifier, "drop the goal-verifier term (ablation)");
    synth->add_flag("--trace", dump_traces, "also dump per-sequence optimization traces");

    CLI::App* eval_cmd = app.add_subcommand("eval", "run the benchmark and write reports");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_flag("--assert-orderings", assert_orderings,
                       "exit 1 unless the benchmark orderings hold");

    CLI::App* render = app.add_subcommand("render", "render sequence files to an SVG court plot");
    add_common(render, render_args);
    render->add_option("files", render_files, "sequence files (JSONL)")->required();
    render->add_option("--mode", render_mode, "path|scatter")
        ->check(CLI::IsMember({"path", "scatter"}))
        ->capture_default_str();
    render->add_option("--svg", svg_name, "output file name inside --out")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (train->parsed()) return cmd_train(train_args, which);
        if (synth->parsed()) return cmd_synth(synth_args, only_id, no_verifier, dump_traces);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, assert_orderings);
        if (render->parsed()) return cmd_render(render_args, render_files, render_mode, svg_name);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
