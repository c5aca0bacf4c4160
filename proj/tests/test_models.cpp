#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"
#include "egosynth/linalg.hpp"
#include "egosynth/models.hpp"
#include "egosynth/rng.hpp"
#include "egosynth/simcourt.hpp"

using namespace egosynth;
using namespace egosynth::model;

namespace {

namespace fs = std::filesystem;

struct Trained {
    sim::Dataset ds;
    EgoEncoder enc;
    FuturePredictor fut;
    GoalVerifier ver;
    std::vector<double> ego_log;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained out;
        out.ds = sim::generate_dataset(sim::SimParams{});
        TrainConfig cfg;
        out.enc = train_ego_encoder(out.ds, cfg, &out.ego_log);
        out.fut = train_future(out.ds, 4, cfg);
        out.ver = train_goal_verifier(out.ds, cfg);
        return out;
    }();
    return t;
}

double l2_12(const geom::CameraConfig& a, const geom::CameraConfig& b) {
    double s = 0;
    for (int i = 0; i < 12; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Mann-Whitney AUC of scores for positives vs negatives.
double rank_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0;
    for (double p : pos)
        for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("egosynth_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// A minimal hand-built dataset whose sequences are all the given length.
sim::Dataset stub_dataset(int frames, int n) {
    sim::Dataset ds;
    ds.id = "stub";
    Rng rng(99);
    for (int s = 0; s < n; ++s) {
        sim::SeqRecord rec;
        rec.seq.id = "stub-" + std::to_string(s);
        for (int i = 0; i < frames; ++i) {
            geom::Pose pose;
            pose.translation = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
            rec.seq.configs.push_back(geom::flatten_pose(pose));
            sim::Observation o(20);
            for (double& v : o) v = rng.normal();
            rec.observations.push_back(o);
        }
        ds.train.push_back(rec);
    }
    return ds;
}

}  // namespace

TEST_CASE("branch_interval matches the closed-form bounds") {
    auto [lo, hi] = branch_interval(2, 4);
    CHECK(lo == doctest::Approx(0.25));
    CHECK(hi == doctest::Approx(0.5));
    CHECK(branch_interval(1, 4).first == 0.0);
    CHECK(branch_interval(1, 4).second == doctest::Approx(0.25));
    CHECK(branch_interval(1, 1).first == 0.0);
    CHECK(branch_interval(1, 1).second == 1.0);
    CHECK_THROWS_AS(branch_interval(0, 4), ValidationError);
    CHECK_THROWS_AS(branch_interval(5, 4), ValidationError);
    CHECK_THROWS_AS(branch_interval(1, 0), ValidationError);
}

TEST_CASE("branch intervals partition the unit interval") {
    for (int k : {1, 2, 3, 4, 7, 10}) {
        CHECK(branch_interval(1, k).first == 0.0);
        CHECK(branch_interval(k, k).second == doctest::Approx(1.0));
        for (int j = 1; j < k; ++j)
            CHECK(branch_interval(j, k).second == doctest::Approx(branch_interval(j + 1, k).first));
    }
}

TEST_CASE("branch_of assigns endpoint ties to the lower branch") {
    CHECK(branch_of(0.0, 4) == 1);
    CHECK(branch_of(0.25, 4) == 1);
    CHECK(branch_of(0.2500001, 4) == 2);
    CHECK(branch_of(0.5, 4) == 2);
    CHECK(branch_of(1.0, 4) == 4);
    CHECK(branch_of(0.3, 1) == 1);
    CHECK_THROWS_AS(branch_of(-0.1, 4), ValidationError);
    CHECK_THROWS_AS(branch_of(1.1, 4), ValidationError);

    Rng rng(7);
    for (int k : {2, 4, 9}) {
        int prev = 1;
        for (int t = 0; t <= 1000; ++t) {
            const double s = t / 1000.0;
            const int j = branch_of(s, k);
            CHECK(j >= prev);  // monotone in s
            prev = j;
            auto [lo, hi] = branch_interval(j, k);
            if (s == 0.0)
                CHECK(j == 1);
            else {
                CHECK(s > lo);
                CHECK(s <= hi + 1e-15);
            }
        }
    }
}

TEST_CASE("goal_label thresholds strictly above 0.92") {
    CHECK(goal_label(0.95) == 1);
    CHECK(goal_label(0.92) == 0);
    CHECK(goal_label(0.5) == 0);
    CHECK(goal_label(0.0) == 0);
    CHECK(goal_label(1.0) == 1);
    CHECK_THROWS_AS(goal_label(-0.01), ValidationError);
    CHECK_THROWS_AS(goal_label(1.01), ValidationError);

    int prev = 0;
    for (int t = 0; t <= 200; ++t) {
        const int y = goal_label(t / 200.0);
        CHECK(y >= prev);
        prev = y;
    }
}

TEST_CASE("whitening output has identity covariance on the kept subspace") {
    const int d = 6, n = 4000;
    Rng rng(31);
    std::vector<sim::Observation> raw(n, sim::Observation(d));
    for (auto& o : raw) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal();
        o[0] = 3.0 * a + 10.0;
        o[1] = a + 0.5 * b - 2.0;
        o[2] = 0.1 * b;
        o[3] = c + a;
        o[4] = 7.25;               // constant: zero variance
        o[5] = 2.0 * c - b + 1.0;
    }
    std::vector<const sim::Observation*> ptrs;
    for (const auto& o : raw) ptrs.push_back(&o);
    const InputTransform t = fit_whitening(ptrs);
    CHECK(t.dim() == static_cast<std::size_t>(d));

    std::vector<std::vector<double>> y;
    for (const auto& o : raw) y.push_back(apply_transform(t, o));

    std::vector<double> mean(d, 0.0), cov(d * d, 0.0);
    for (const auto& v : y)
        for (int i = 0; i < d; ++i) mean[i] += v[i] / n;
    for (const auto& v : y)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) cov[i * d + j] += (v[i] - mean[i]) * (v[j] - mean[j]) / n;

    for (int i = 0; i < d; ++i) CHECK(std::abs(mean[i]) < 1e-9);

    // Covariance eigenvalues: one per independent source direction, zero for
    // the projected-out constant; the raw data has rank 3 plus the offsets.
    std::vector<double> eigvals(d), eigvecs(d * d);
    linalg::eigen_symmetric(d, cov, eigvals, eigvecs);
    int ones = 0, zeros = 0;
    for (double ev : eigvals) {
        if (std::abs(ev - 1.0) < 1e-6) ++ones;
        else if (std::abs(ev) < 1e-9) ++zeros;
    }
    CHECK(ones == 3);
    CHECK(zeros == d - 3);

    CHECK_THROWS_AS(apply_transform(t, std::vector<double>(d + 1, 0.0)), ValidationError);
    CHECK_THROWS_AS(fit_whitening({}), ValidationError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.iterations = -5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("ego encoder training cuts the loss by an order of magnitude") {
    const Trained& t = trained();
    CHECK(t.enc.initial_loss > 0.0);
    CHECK(t.enc.final_loss > 0.0);
    CHECK(t.enc.final_loss < 0.10 * t.enc.initial_loss);
    CHECK(t.enc.dataset_id == t.ds.id);

    CHECK(t.ego_log.size() == 10000);
    for (double v : t.ego_log) CHECK(std::isfinite(v));
    double head = 0, tail = 0;
    for (int i = 0; i < 100; ++i) {
        head += t.ego_log[i] / 100.0;
        tail += t.ego_log[t.ego_log.size() - 100 + i] / 100.0;
    }
    CHECK(tail < 0.5 * head);
}

TEST_CASE("ego encoder reads the pose out of clean observations") {
    sim::SimParams p;
    p.observation_noise = 0.0;
    p.count = 300;
    sim::Dataset ds = sim::generate_dataset(p);
    TrainConfig cfg;
    EgoEncoder enc = train_ego_encoder(ds, cfg);

    double err = 0;
    long n = 0;
    for (const auto& rec : ds.test)
        for (std::size_t f = 0; f < rec.seq.configs.size(); ++f) {
            err += l2_12(encode(enc, rec.observations[f]),
                         geom::normalize(rec.seq.configs[f], ds.normalizer));
            ++n;
        }
    CHECK(n > 500);
    CHECK(err / n < 0.05);
}

TEST_CASE("encode is deterministic and validates dimensions") {
    const Trained& t = trained();
    const sim::Observation& o = t.ds.test[0].observations[0];
    const geom::CameraConfig a = encode(t.enc, o);
    const geom::CameraConfig b = encode(t.enc, o);
    CHECK(a == b);
    CHECK_THROWS_AS(encode(t.enc, sim::Observation(19, 0.0)), ValidationError);
}

TEST_CASE("future predictor has k heads and fits the branch targets") {
    const Trained& t = trained();
    CHECK(t.fut.k() == 4);
    const auto phis = predict_future(t.fut, t.ds.test[0].observations[0]);
    CHECK(phis.size() == 4);
    CHECK(phis == predict_future(t.fut, t.ds.test[0].observations[0]));
    CHECK(t.fut.final_loss < 0.25 * t.fut.initial_loss);
    CHECK_THROWS_AS(predict_future(t.fut, sim::Observation(3, 0.0)), ValidationError);
}

TEST_CASE("branch predictions move away from the start as j grows") {
    const Trained& t = trained();
    std::array<double, 4> mean{};
    int cnt = 0;
    for (const auto& rec : t.ds.test) {
        const auto phis = predict_future(t.fut, rec.observations[0]);
        const auto start = geom::normalize(rec.seq.configs[0], t.ds.normalizer);
        for (int j = 0; j < 4; ++j) mean[j] += l2_12(phis[j], start);
        ++cnt;
    }
    for (int j = 0; j + 1 < 4; ++j) CHECK(mean[j] / cnt < mean[j + 1] / cnt);
}

TEST_CASE("final branch lands near the basket for most test starts") {
    const Trained& t = trained();
    int near = 0, cnt = 0;
    for (const auto& rec : t.ds.test) {
        const auto phis = predict_future(t.fut, rec.observations[0]);
        const auto c = geom::camera_center(geom::denormalize(phis[3], t.ds.normalizer));
        const double dx = c[0] - t.ds.params.basket[0];
        const double dy = c[1] - t.ds.params.basket[1];
        if (std::sqrt(dx * dx + dy * dy) <= 3.0) ++near;
        ++cnt;
    }
    CHECK(near >= (cnt * 9) / 10);
}

TEST_CASE("anchorless sequences are skipped, all-anchorless is an error") {
    TrainConfig cfg;
    cfg.iterations = 50;

    sim::Dataset all_short = stub_dataset(5, 3);
    CHECK_THROWS_AS(train_future(all_short, 4, cfg), ValidationError);

    sim::Dataset mixed = stub_dataset(12, 3);
    mixed.train.push_back(stub_dataset(5, 1).train[0]);
    CHECK_NOTHROW(train_future(mixed, 4, cfg));

    CHECK_THROWS_AS(train_future(sim::Dataset{}, 4, cfg), ValidationError);
    CHECK_THROWS_AS(train_future(mixed, 0, cfg), ValidationError);
    CHECK_THROWS_AS(train_ego_encoder(sim::Dataset{}, cfg), ValidationError);
    CHECK_THROWS_AS(train_goal_verifier(sim::Dataset{}, cfg), ValidationError);
}

TEST_CASE("verifier needs both classes in the training data") {
    TrainConfig cfg;
    cfg.iterations = 50;
    // A single-frame sequence has s=1 everywhere: no negative examples.
    CHECK_THROWS_AS(train_goal_verifier(stub_dataset(1, 4), cfg), ValidationError);
}

TEST_CASE("verifier separates end configs from the rest") {
    const Trained& t = trained();
    CHECK(t.ver.final_loss < t.ver.initial_loss);

    std::vector<double> pos, neg;
    double mean_end = 0, mean_early = 0;
    long n_end = 0, n_early = 0;
    for (const auto& rec : t.ds.test) {
        const auto m = rec.seq.length();
        for (std::size_t i = 1; i <= m; ++i) {
            const double s = sim::normalized_time(i, m);
            const double psi = verify(t.ver, geom::normalize(rec.seq.configs[i - 1], t.ds.normalizer));
            CHECK(psi > 0.0);
            CHECK(psi < 1.0);
            if (s > 0.92) {
                pos.push_back(psi);
                mean_end += psi;
                ++n_end;
            } else {
                neg.push_back(psi);
                if (s < 0.5) {
                    mean_early += psi;
                    ++n_early;
                }
            }
        }
    }
    CHECK(mean_end / n_end > mean_early / n_early);
    CHECK(rank_auc(pos, neg) >= 0.9);
}

TEST_CASE("verifier gradient matches finite differences") {
    const Trained& t = trained();
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        geom::CameraConfig h;
        for (int i = 0; i < 12; ++i) h.v[i] = rng.normal();
        const auto grad = verify_grad(t.ver, h);
        const double h_step = 1e-6;
        double num = 0, den = 0;
        for (int i = 0; i < 12; ++i) {
            geom::CameraConfig hp = h, hm = h;
            hp.v[i] += h_step;
            hm.v[i] -= h_step;
            const double fd = (verify(t.ver, hp) - verify(t.ver, hm)) / (2 * h_step);
            num += (grad[i] - fd) * (grad[i] - fd);
            den += fd * fd;
        }
        CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-8) < 1e-5);
    }
}

TEST_CASE("log score agrees with the plain score and its gradient") {
    const Trained& t = trained();
    Rng rng(56);
    for (int trial = 0; trial < 20; ++trial) {
        geom::CameraConfig h;
        for (int i = 0; i < 12; ++i) h.v[i] = 2.0 * rng.normal();
        std::array<double, 12> lg{};
        const double ls = verifier_log_score(t.ver, h, &lg);
        const double psi = verify(t.ver, h);
        CHECK(ls == doctest::Approx(std::log(psi)).epsilon(1e-9));
        const auto g = verify_grad(t.ver, h);
        for (int i = 0; i < 12; ++i) CHECK(lg[i] == doctest::Approx(g[i] / psi).epsilon(1e-7));
    }
    CHECK_THROWS_AS(verify(t.ver, geom::CameraConfig{{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                                      std::numeric_limits<double>::quiet_NaN()}}),
                    ValidationError);
}

TEST_CASE("zero-weight verifier is indifferent") {
    GoalVerifier gv;
    gv.net = net::net_init(net::NetSpec{{12, 100, 1}, {net::Act::Tanh, net::Act::Sigmoid}}, 1);
    for (auto& w : gv.net.weights)
        for (double& v : w) v = 0.0;
    for (auto& b : gv.net.biases)
        for (double& v : b) v = 0.0;

    geom::CameraConfig h;
    for (int i = 0; i < 12; ++i) h.v[i] = 0.3 * i - 1.0;
    CHECK(verify(gv, h) == 0.5);
    for (double g : verify_grad(gv, h)) CHECK(g == 0.0);
}

TEST_CASE("training is deterministic given dataset and seed") {
    const Trained& t = trained();
    TrainConfig cfg;
    const GoalVerifier again = train_goal_verifier(t.ds, cfg);
    CHECK(again.initial_loss == t.ver.initial_loss);
    CHECK(again.final_loss == t.ver.final_loss);
    for (const auto& rec : t.ds.test) {
        const auto h = geom::normalize(rec.seq.configs[0], t.ds.normalizer);
        CHECK(verify(again, h) == verify(t.ver, h));
    }
}

TEST_CASE("model bundles reload with bit-identical predictions") {
    const Trained& t = trained();
    const fs::path dir = fresh_dir("models");

    save_ego((dir / "ego.jsonl").string(), t.enc);
    const EgoEncoder enc = load_ego((dir / "ego.jsonl").string());
    CHECK(enc.dataset_id == t.enc.dataset_id);
    CHECK(enc.initial_loss == t.enc.initial_loss);
    CHECK(enc.final_loss == t.enc.final_loss);

    save_future((dir / "future.jsonl").string(), t.fut);
    const FuturePredictor fut = load_future((dir / "future.jsonl").string());
    CHECK(fut.k() == t.fut.k());

    save_verifier((dir / "verifier.jsonl").string(), t.ver);
    const GoalVerifier ver = load_verifier((dir / "verifier.jsonl").string());

    for (int r = 0; r < 40; ++r) {
        const auto& rec = t.ds.test[r % t.ds.test.size()];
        CHECK(encode(enc, rec.observations[0]) == encode(t.enc, rec.observations[0]));
        CHECK(predict_future(fut, rec.observations[0]) == predict_future(t.fut, rec.observations[0]));
        const auto h = geom::normalize(rec.seq.configs[0], t.ds.normalizer);
        CHECK(verify(ver, h) == verify(t.ver, h));
    }

    CHECK_THROWS_AS(load_future((dir / "ego.jsonl").string()), ParseError);
    CHECK_THROWS_AS(load_ego((dir / "verifier.jsonl").string()), ParseError);
    io::write_file_atomic((dir / "bad.jsonl").string(), "not json\n");
    CHECK_THROWS_AS(load_verifier((dir / "bad.jsonl").string()), ParseError);
    fs::remove_all(dir);
}
