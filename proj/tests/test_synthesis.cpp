#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"
#include "egosynth/models.hpp"
#include "egosynth/rng.hpp"
#include "egosynth/simcourt.hpp"
#include "egosynth/synthesis.hpp"

using namespace egosynth;
using namespace egosynth::synth;

namespace {

namespace fs = std::filesystem;

struct Trained {
    sim::Dataset ds;
    model::EgoEncoder enc;
    model::FuturePredictor fut;
    model::GoalVerifier ver;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained out;
        out.ds = sim::generate_dataset(sim::SimParams{});
        model::TrainConfig cfg;
        out.enc = model::train_ego_encoder(out.ds, cfg);
        out.fut = model::train_future(out.ds, 4, cfg);
        out.ver = model::train_goal_verifier(out.ds, cfg);
        return out;
    }();
    return t;
}

model::GoalVerifier flat_verifier() {
    model::GoalVerifier gv;
    gv.net = net::net_init(net::NetSpec{{12, 100, 1}, {net::Act::Tanh, net::Act::Sigmoid}}, 3);
    for (auto& w : gv.net.weights)
        for (double& v : w) v = 0.0;
    for (auto& b : gv.net.biases)
        for (double& v : b) v = 0.0;
    return gv;
}

double sq12(const geom::CameraConfig& a, const geom::CameraConfig& b) {
    double s = 0;
    for (int i = 0; i < 12; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

geom::CameraConfig random_config(Rng& rng, double scale) {
    geom::CameraConfig c;
    for (double& v : c.v) v = scale * rng.normal();
    return c;
}

}  // namespace

TEST_CASE("options validation") {
    SynthesisOptions opts;
    CHECK_NOTHROW(opts.validate(4));
    opts.iterations = 3;
    CHECK_THROWS_AS(opts.validate(4), ValidationError);
    opts = SynthesisOptions{};
    opts.step = 0.0;
    CHECK_THROWS_AS(opts.validate(1), ValidationError);
    opts = SynthesisOptions{};
    opts.m_out = 1;
    CHECK_THROWS_AS(opts.validate(1), ValidationError);
    CHECK_THROWS_AS(SynthesisOptions{}.validate(0), ValidationError);
}

TEST_CASE("branch schedule formula") {
    CHECK(branch_schedule(0, 6000, 4) == 1);
    CHECK(branch_schedule(1499, 6000, 4) == 1);
    CHECK(branch_schedule(1500, 6000, 4) == 2);
    CHECK(branch_schedule(5999, 6000, 4) == 4);
    CHECK(branch_schedule(3, 7, 2) == 1);
    CHECK(branch_schedule(4, 7, 2) == 2);
    CHECK_THROWS_AS(branch_schedule(-1, 6000, 4), ValidationError);
    CHECK_THROWS_AS(branch_schedule(6000, 6000, 4), ValidationError);
    CHECK_THROWS_AS(branch_schedule(0, 0, 4), ValidationError);
    CHECK_THROWS_AS(branch_schedule(0, 6000, 0), ValidationError);
}

TEST_CASE("schedule is contiguous, covers every branch, equal phases when divisible") {
    struct Case {
        long n;
        int k;
    };
    for (const auto [n, k] : {Case{6000, 4}, Case{10, 3}, Case{7, 2}, Case{5, 5}, Case{100, 1}}) {
        int prev = 1;
        std::vector<long> counts(k, 0);
        for (long c = 0; c < n; ++c) {
            const int j = branch_schedule(c, n, k);
            CHECK(j >= 1);
            CHECK(j <= k);
            CHECK(j >= prev);
            CHECK(j - prev <= 1);
            prev = j;
            ++counts[j - 1];
        }
        CHECK(branch_schedule(0, n, k) == 1);
        CHECK(branch_schedule(n - 1, n, k) == k);
        for (long cnt : counts) CHECK(cnt > 0);
        if (n % k == 0)
            for (long cnt : counts) CHECK(cnt == n / k);
    }
}

TEST_CASE("objective hand values against an indifferent verifier") {
    const model::GoalVerifier flat = flat_verifier();
    geom::CameraConfig h, phi;
    for (int i = 0; i < 12; ++i) h.v[i] = phi.v[i] = 0.1 * i - 0.5;

    CHECK(objective(h, phi, flat) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(objective(h, phi, flat) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    h.v[0] = phi.v[0] + 2.0;  // squared distance 4
    CHECK(objective(h, phi, flat) == doctest::Approx(4.693147).epsilon(1e-6));

    h.v[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(objective(h, phi, flat), ValidationError);
}

TEST_CASE("objective gradient closed forms") {
    const model::GoalVerifier flat = flat_verifier();
    geom::CameraConfig h, phi;
    for (int i = 0; i < 12; ++i) h.v[i] = phi.v[i] = 0.3 * i;

    for (double g : objective_grad(h, phi, flat)) CHECK(g == 0.0);

    phi.v[0] = h.v[0] + 1.0;  // phi - h = e1
    const auto g = objective_grad(h, phi, flat);
    CHECK(g[0] == doctest::Approx(-2.0).epsilon(1e-12));
    for (int i = 1; i < 12; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("objective gradient matches finite differences of the objective") {
    const Trained& t = trained();
    Rng rng(81);
    for (int trial = 0; trial < 25; ++trial) {
        const geom::CameraConfig h = random_config(rng, 1.5);
        const geom::CameraConfig phi = random_config(rng, 1.5);
        const auto grad = objective_grad(h, phi, t.ver);
        const double step = 1e-6;
        double num = 0, den = 0;
        for (int i = 0; i < 12; ++i) {
            geom::CameraConfig hp = h, hm = h;
            hp.v[i] += step;
            hm.v[i] -= step;
            const double fd = (objective(hp, phi, t.ver) - objective(hm, phi, t.ver)) / (2 * step);
            num += (grad[i] - fd) * (grad[i] - fd);
            den += fd * fd;
        }
        CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-8) < 1e-5);
    }
}

TEST_CASE("pure data term contracts at the closed-form rate") {
    Rng rng(17);
    const geom::CameraConfig start = random_config(rng, 2.0);
    const geom::CameraConfig phi = random_config(rng, 2.0);
    SynthesisOptions opts;
    opts.iterations = 1000;
    opts.step = 0.001;

    const model::GoalVerifier flat = flat_verifier();
    for (const model::GoalVerifier* ver : {static_cast<const model::GoalVerifier*>(nullptr), &flat}) {
        const SynthesisTrace trace = synthesize(start, {phi}, ver, opts);
        const double d0 = std::sqrt(sq12(phi, trace.iterates[0]));
        double prev = d0;
        for (long c = 1; c <= opts.iterations; ++c) {
            const double want = d0 * std::pow(1.0 - 2.0 * opts.step, static_cast<double>(c));
            const double got = std::sqrt(sq12(phi, trace.iterates[c]));
            CHECK(std::abs(got - want) <= 1e-9 * want);
            CHECK(got < prev);
            prev = got;
        }
    }
}

TEST_CASE("zero gradient leaves the trace constant") {
    Rng rng(18);
    const geom::CameraConfig start = random_config(rng, 1.0);
    SynthesisOptions opts;
    opts.iterations = 50;
    const SynthesisTrace trace = synthesize(start, {start, start}, nullptr, opts);
    CHECK(trace.iterates.size() == 51);
    for (const auto& h : trace.iterates) CHECK(h == start);
    for (double o : trace.objectives) CHECK(o == 0.0);

    const sim::Sequence seq = extract_sequence(trace, 5, geom::Normalizer{}, "const");
    CHECK(seq.configs.size() == 5);
}

TEST_CASE("trace records every iterate, objective, and phase start") {
    Rng rng(19);
    const geom::CameraConfig start = random_config(rng, 1.0);
    std::vector<geom::CameraConfig> phis;
    for (int j = 0; j < 4; ++j) phis.push_back(random_config(rng, 1.0));
    SynthesisOptions opts;

    const SynthesisTrace trace = synthesize(start, phis, nullptr, opts);
    CHECK(trace.iterates.size() == 6001);
    CHECK(trace.objectives.size() == 6001);
    CHECK(trace.phase_starts == std::vector<long>{0, 1500, 3000, 4500});
    for (const auto& h : trace.iterates) CHECK(geom::all_finite(h));

    const SynthesisTrace again = synthesize(start, phis, nullptr, opts);
    CHECK(again.iterates == trace.iterates);
    CHECK(again.objectives == trace.objectives);

    CHECK_THROWS_AS(synthesize(start, {}, nullptr, opts), ValidationError);
    geom::CameraConfig bad = start;
    bad.v[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(synthesize(bad, phis, nullptr, opts), ValidationError);
    CHECK_THROWS_AS(synthesize(start, {phis[0], bad}, nullptr, opts), ValidationError);
}

TEST_CASE("oversized steps diverge with the iteration reported") {
    Rng rng(20);
    const geom::CameraConfig start = random_config(rng, 1.0);
    geom::CameraConfig phi = start;
    phi.v[0] += 1.0;
    SynthesisOptions opts;
    opts.iterations = 2000;
    opts.step = 50.0;  // |1 - 2*step| = 99: the recurrence explodes
    try {
        synthesize(start, {phi}, nullptr, opts);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.iteration() > 0);
        CHECK(e.iteration() <= 2000);
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("extraction keeps endpoints and subsamples uniformly") {
    Rng rng(21);
    SynthesisOptions opts;
    opts.iterations = 100;
    const geom::CameraConfig start = random_config(rng, 0.5);
    geom::CameraConfig phi = start;
    for (int i = 0; i < 12; ++i) phi.v[i] += 0.2;
    const SynthesisTrace trace = synthesize(start, {phi}, nullptr, opts);

    geom::Normalizer norm;  // identity
    const sim::Sequence all = extract_sequence(trace, 101, norm, "all");
    CHECK(all.configs.size() == 101);
    const sim::Sequence ends = extract_sequence(trace, 2, norm, "ends");
    CHECK(ends.configs.size() == 2);

    // Orthonormalization aside, endpoints must come from h(0) and h(N);
    // translation dims pass through untouched by the rotation fixup.
    for (int i : {3, 7, 11}) {
        CHECK(ends.configs.front()[i] == doctest::Approx(trace.iterates.front()[i]).epsilon(1e-12));
        CHECK(ends.configs.back()[i] == doctest::Approx(trace.iterates.back()[i]).epsilon(1e-12));
    }

    const sim::Sequence mid = extract_sequence(trace, 5, norm, "mid");
    CHECK(mid.configs.size() == 5);
    for (int tdx = 0; tdx < 5; ++tdx)
        for (int i : {3, 7, 11})
            CHECK(mid.configs[tdx][i] ==
                  doctest::Approx(trace.iterates[tdx * 25][i]).epsilon(1e-12));

    CHECK_THROWS_AS(extract_sequence(trace, 102, norm, "x"), ValidationError);
    CHECK_THROWS_AS(extract_sequence(trace, 1, norm, "x"), ValidationError);
}

TEST_CASE("fixture synthesis raises the goal score and later phases descend") {
    const Trained& t = trained();
    SynthesisOptions opts;
    int psi_up = 0, later_ok = 0, later_all = 0;
    double mstart[4] = {0, 0, 0, 0}, mend[4] = {0, 0, 0, 0};
    const int n_seq = 40;
    for (int r = 0; r < n_seq; ++r) {
        const auto& rec = t.ds.test[r];
        const auto start = model::encode(t.enc, rec.observations[0]);
        const auto phis = model::predict_future(t.fut, rec.observations[0]);
        const SynthesisTrace trace = synthesize(start, phis, &t.ver, opts);

        if (model::verify(t.ver, trace.iterates.back()) >
            model::verify(t.ver, trace.iterates.front()))
            ++psi_up;

        for (int j = 0; j < 4; ++j) {
            const long c0 = trace.phase_starts[j];
            const long c1 = j + 1 < 4 ? trace.phase_starts[j + 1] : opts.iterations;
            const double d0 = sq12(phis[j], trace.iterates[c0]);
            const double d1 = sq12(phis[j], trace.iterates[c1]);
            mstart[j] += d0 / n_seq;
            mend[j] += d1 / n_seq;
            if (j > 0) {
                ++later_all;
                if (d1 < d0) ++later_ok;
            }
        }

        const sim::Sequence gen = extract_sequence(trace, opts.m_out, t.ds.normalizer,
                                                   rec.seq.id + "-gen");
        CHECK(gen.configs.size() == 25);
        for (const auto& c : gen.configs) CHECK_NOTHROW(geom::decompose(c, geom::RotationCheck::Strict));
    }
    CHECK(psi_up == n_seq);
    CHECK(later_ok >= later_all - 2);          // phases 2..4 descend per sequence
    for (int j = 1; j < 4; ++j) CHECK(mend[j] < mstart[j]);  // and in the mean
}

TEST_CASE("trace files are line-delimited and byte-stable") {
    Rng rng(22);
    const geom::CameraConfig start = random_config(rng, 1.0);
    std::vector<geom::CameraConfig> phis;
    for (int j = 0; j < 3; ++j) phis.push_back(random_config(rng, 1.0));
    SynthesisOptions opts;
    opts.iterations = 30;

    const SynthesisTrace trace = synthesize(start, phis, nullptr, opts);
    const fs::path dir = fs::temp_directory_path() / "egosynth_test_trace";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string path = (dir / "trace.jsonl").string();
    save_trace(path, trace);

    const auto lines = io::split_lines(io::read_file(path));
    REQUIRE(lines.size() == 32);
    io::expect_header(io::parse_line(lines[0], 1), "egosynth-trace", 1, 1);
    int phase_marks = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto j = io::parse_line(lines[i], static_cast<int>(i) + 1);
        CHECK(j["c"] == static_cast<long>(i) - 1);
        CHECK(j["h"].size() == 12);
        CHECK(j["objective"].is_number());
        phase_marks += j.value("phase_start", false) ? 1 : 0;
    }
    CHECK(phase_marks == 3);

    const std::string first = io::read_file(path);
    save_trace(path, trace);
    CHECK(io::read_file(path) == first);
    fs::remove_all(dir);
}
