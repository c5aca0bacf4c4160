#include "egosynth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"
#include "egosynth/rng.hpp"

#include "bundle_format.hpp"

namespace egosynth::eval {

namespace {

using geom::CameraConfig;

double sq12(const CameraConfig& a, const CameraConfig& b) {
    double s = 0;
    for (int i = 0; i < 12; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

std::vector<CameraConfig> normalize_all(const sim::Sequence& seq, const geom::Normalizer& norm) {
    std::vector<CameraConfig> out;
    out.reserve(seq.configs.size());
    for (const auto& c : seq.configs) out.push_back(geom::normalize(c, norm));
    return out;
}

double directed(const std::vector<CameraConfig>& a, const std::vector<CameraConfig>& b) {
    double worst = 0;
    for (const auto& x : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& y : b) best = std::min(best, sq12(x, y));
        worst = std::max(worst, best);
    }
    return worst;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double hausdorff(const sim::Sequence& a, const sim::Sequence& b,
                 const geom::Normalizer& normalizer) {
    if (a.configs.empty() || b.configs.empty())
        throw ValidationError("hausdorff needs nonempty sequences");
    const auto na = normalize_all(a, normalizer);
    const auto nb = normalize_all(b, normalizer);
    return std::sqrt(std::max(directed(na, nb), directed(nb, na)));
}

std::vector<PoolEntry> build_pool(const std::vector<sim::SeqRecord>& records) {
    std::vector<PoolEntry> pool;
    for (const auto& rec : records) {
        const std::size_t m = rec.seq.configs.size();
        for (std::size_t i = 0; i < m; ++i)
            pool.push_back({rec.seq.configs[i], rec.seq.id, i + 1, m});
    }
    std::stable_sort(pool.begin(), pool.end(), [](const PoolEntry& a, const PoolEntry& b) {
        return a.id != b.id ? a.id < b.id : a.index < b.index;
    });
    return pool;
}

double cg_score(const CameraConfig& last, const std::vector<PoolEntry>& pool,
                const geom::Normalizer& normalizer) {
    if (pool.empty()) throw ValidationError("goal-progress lookup over an empty pool");
    const CameraConfig q = geom::normalize(last, normalizer);
    double best = std::numeric_limits<double>::infinity();
    const PoolEntry* hit = nullptr;
    for (const auto& e : pool) {
        const double d = sq12(q, geom::normalize(e.config, normalizer));
        if (d < best) {
            best = d;
            hit = &e;
        }
    }
    return static_cast<double>(hit->index) / static_cast<double>(hit->length);
}

sim::Sequence nn_baseline(const CameraConfig& start, const std::vector<sim::SeqRecord>& trainset,
                          const geom::Normalizer& normalizer) {
    if (trainset.empty()) throw ValidationError("nearest-neighbor lookup over an empty train set");
    const CameraConfig q = geom::normalize(start, normalizer);
    double best = std::numeric_limits<double>::infinity();
    const sim::SeqRecord* hit = nullptr;
    for (const auto& rec : trainset) {
        if (rec.seq.configs.empty()) continue;
        const double d = sq12(q, geom::normalize(rec.seq.configs.front(), normalizer));
        if (d < best) {
            best = d;
            hit = &rec;
        }
    }
    if (!hit) throw ValidationError("no training sequence has any frames");
    return hit->seq;
}

RecurrentBaseline train_recurrent(const sim::Dataset& ds, const model::TrainConfig& cfg,
                                  std::vector<double>* loss_log) {
    cfg.validate();
    if (ds.train.empty()) throw ValidationError("cannot train on an empty dataset");

    std::vector<std::pair<CameraConfig, CameraConfig>> pairs;
    std::size_t longest = 0;
    for (const auto& rec : ds.train) {
        const auto& cs = rec.seq.configs;
        longest = std::max(longest, cs.size());
        for (std::size_t i = 0; i + 1 < cs.size(); ++i)
            pairs.emplace_back(geom::normalize(cs[i], ds.normalizer),
                               geom::normalize(cs[i + 1], ds.normalizer));
    }
    if (pairs.empty()) throw ValidationError("no adjacent config pairs to train on");

    RecurrentBaseline rb;
    rb.dataset_id = ds.id;
    rb.max_length = longest;
    rb.step = net::net_init(net::NetSpec{{12, 64, 12}, {net::Act::Tanh, net::Act::Identity}},
                            derive_seed(cfg.seed, 0x6EC));
    net::SgdState sgd = net::make_sgd_state(rb.step, cfg.lr, cfg.momentum, cfg.weight_decay);

    Rng rng(cfg.seed);
    std::vector<double> local_log;
    std::vector<double>& log = loss_log ? *loss_log : local_log;
    log.reserve(log.size() + cfg.iterations);

    for (long iter = 0; iter < cfg.iterations; ++iter) {
        net::Grads grads = net::zero_grads(rb.step);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& [h, next] = pairs[rng.index(pairs.size())];
            net::Cache cache;
            const auto out = net::forward(rb.step, h.v, &cache);
            std::vector<double> grad_out(12);
            for (int i = 0; i < 12; ++i) {
                const double err = h[i] + out[i] - next[i];
                batch_loss += err * err;
                grad_out[i] = 2.0 * err / cfg.batch;
            }
            grads.add(net::backward_params(rb.step, cache, grad_out));
        }
        log.push_back(batch_loss / cfg.batch);
        net::sgd_step(rb.step, grads, sgd);
    }
    detail::finish_losses(log, &rb.initial_loss, &rb.final_loss);
    return rb;
}

sim::Sequence rollout(const RecurrentBaseline& baseline, const CameraConfig& start,
                      const geom::Normalizer& normalizer, const std::string& id) {
    if (baseline.epsilon <= 0.0) throw ValidationError("stop threshold must be positive");
    sim::Sequence seq;
    seq.id = id;
    seq.configs.push_back(start);

    CameraConfig h = geom::normalize(start, normalizer);
    while (seq.configs.size() <= baseline.max_length) {
        const auto out = net::forward(baseline.step, h.v);
        CameraConfig next;
        double delta = 0;
        for (int i = 0; i < 12; ++i) {
            next.v[i] = h[i] + out[i];
            delta += out[i] * out[i];
        }
        seq.configs.push_back(geom::denormalize(next, normalizer));
        if (std::sqrt(delta) < baseline.epsilon) break;
        h = next;
    }
    return seq;
}

void save_recurrent(const std::string& path, const RecurrentBaseline& baseline) {
    std::string body = detail::bundle_prefix("recurrent", baseline.dataset_id,
                                             baseline.initial_loss, baseline.final_loss);
    body += ",\"epsilon\":" + io::format_double(baseline.epsilon);
    body += ",\"max_length\":" + std::to_string(baseline.max_length);
    body += ",\"net\":" + net::net_body_json(baseline.step) + "}";
    detail::write_bundle(path, body);
}

RecurrentBaseline load_recurrent(const std::string& path) {
    const nlohmann::json j = detail::read_bundle(path, "recurrent");
    RecurrentBaseline rb;
    try {
        rb.dataset_id = j.at("dataset_id").get<std::string>();
        rb.initial_loss = j.at("initial_loss").get<double>();
        rb.final_loss = j.at("final_loss").get<double>();
        rb.epsilon = j.at("epsilon").get<double>();
        rb.max_length = j.at("max_length").get<std::size_t>();
        rb.step = net::net_from_json(j.at("net"), 2);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad recurrent bundle: ") + e.what(), 2);
    }
    if (rb.epsilon <= 0.0) throw ParseError("stop threshold must be positive", 2);
    return rb;
}

PfmResult pfm_score(const Generator& generate, const std::vector<sim::SeqRecord>& testset,
                    const geom::Normalizer& normalizer) {
    if (testset.empty()) throw ValidationError("empty test set");
    PfmResult res;
    double total = 0;
    for (const auto& rec : testset) {
        try {
            const sim::Sequence gen = generate(rec);
            const double d = hausdorff(rec.seq, gen, normalizer);
            res.per_sequence.emplace_back(rec.seq.id, d);
            total += d;
        } catch (const Error&) {
            ++res.excluded;
        }
    }
    if (!res.per_sequence.empty()) res.mean = total / res.per_sequence.size();
    return res;
}

double encoder_test_error(const model::EgoEncoder& encoder, const sim::Dataset& ds) {
    double total = 0;
    long n = 0;
    for (const auto& rec : ds.test)
        for (std::size_t f = 0; f < rec.seq.configs.size(); ++f) {
            const auto pred = model::encode(encoder, rec.observations[f]);
            total += std::sqrt(sq12(pred, geom::normalize(rec.seq.configs[f], ds.normalizer)));
            ++n;
        }
    if (n == 0) throw ValidationError("test set has no observations");
    return total / n;
}

double retrieval_test_error(const sim::Dataset& ds) {
    struct Ref {
        const sim::Observation* obs;
        CameraConfig config;
    };
    std::vector<Ref> train;
    for (const auto& rec : ds.train)
        for (std::size_t f = 0; f < rec.seq.configs.size(); ++f)
            train.push_back({&rec.observations[f], geom::normalize(rec.seq.configs[f], ds.normalizer)});
    if (train.empty()) throw ValidationError("train set has no observations");

    double total = 0;
    long n = 0;
    for (const auto& rec : ds.test)
        for (std::size_t f = 0; f < rec.seq.configs.size(); ++f) {
            const auto& q = rec.observations[f];
            double best = std::numeric_limits<double>::infinity();
            const Ref* hit = nullptr;
            for (const auto& r : train) {
                double d = 0;
                for (std::size_t i = 0; i < q.size(); ++i) {
                    const double diff = q[i] - (*r.obs)[i];
                    d += diff * diff;
                    if (d >= best) break;
                }
                if (d < best) {
                    best = d;
                    hit = &r;
                }
            }
            total += std::sqrt(sq12(hit->config, geom::normalize(rec.seq.configs[f], ds.normalizer)));
            ++n;
        }
    if (n == 0) throw ValidationError("test set has no observations");
    return total / n;
}

double auc_score(const std::vector<double>& positives, const std::vector<double>& negatives) {
    if (positives.empty() || negatives.empty())
        throw ValidationError("both score classes must be nonempty");
    double wins = 0;
    for (double p : positives)
        for (double q : negatives) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

const MethodResult* MetricReport::find(const std::string& method) const {
    for (const auto& m : methods)
        if (m.method == method) return &m;
    return nullptr;
}

MetricReport run_benchmark(const sim::Dataset& ds, const std::vector<std::string>& methods,
                           const std::vector<std::uint64_t>& seeds,
                           const model::TrainConfig& base_cfg,
                           const synth::SynthesisOptions& opts) {
    BenchTrainConfigs cfgs;
    cfgs.ego = cfgs.future = cfgs.verifier = cfgs.recurrent = base_cfg;
    return run_benchmark(ds, methods, seeds, cfgs, opts);
}

MetricReport run_benchmark(const sim::Dataset& ds, const std::vector<std::string>& methods,
                           const std::vector<std::uint64_t>& seeds,
                           const BenchTrainConfigs& base_cfgs,
                           const synth::SynthesisOptions& opts) {
    if (methods.empty()) throw ValidationError("no methods requested");
    if (seeds.empty()) throw ValidationError("no seeds given");
    for (const auto& m : methods)
        if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end())
            throw ValidationError("unknown method \"" + m + "\"");

    const auto pool = build_pool(ds.test);
    const bool want_synth = std::find(methods.begin(), methods.end(), "full") != methods.end() ||
                            std::find(methods.begin(), methods.end(), "no_verifier") != methods.end();
    const bool want_full = std::find(methods.begin(), methods.end(), "full") != methods.end();
    const bool want_rec = std::find(methods.begin(), methods.end(), "recurrent") != methods.end();

    MetricReport report;
    report.dataset_id = ds.id;
    report.seeds = seeds;
    for (const auto& name : kAllMethods)
        if (std::find(methods.begin(), methods.end(), name) != methods.end())
            report.methods.push_back(MethodResult{name, 0.0, {}, {}, {}, 0});

    for (const std::uint64_t seed : seeds) {
        BenchTrainConfigs cfgs = base_cfgs;
        cfgs.ego.seed = cfgs.future.seed = cfgs.verifier.seed = cfgs.recurrent.seed = seed;

        model::EgoEncoder enc;
        model::FuturePredictor fut;
        model::GoalVerifier ver;
        RecurrentBaseline rec_base;
        if (want_synth) {
            enc = model::train_ego_encoder(ds, cfgs.ego);
            fut = model::train_future(ds, cfgs.branches, cfgs.future);
        }
        if (want_full) ver = model::train_goal_verifier(ds, cfgs.verifier);
        if (want_rec) {
            rec_base = train_recurrent(ds, cfgs.recurrent);
            report.recurrent_epsilon = rec_base.epsilon;
        }

        for (auto& mres : report.methods) {
            Generator gen;
            if (mres.method == "full" || mres.method == "no_verifier") {
                const model::GoalVerifier* v = mres.method == "full" ? &ver : nullptr;
                gen = [&, v](const sim::SeqRecord& rec) {
                    const auto start = model::encode(enc, rec.observations.at(0));
                    const auto phis = model::predict_future(fut, rec.observations.at(0));
                    const auto trace = synth::synthesize(start, phis, v, opts);
                    return synth::extract_sequence(trace, opts.m_out, ds.normalizer,
                                                   rec.seq.id + "-gen");
                };
            } else if (mres.method == "nn") {
                gen = [&](const sim::SeqRecord& rec) {
                    return nn_baseline(rec.seq.configs.at(0), ds.train, ds.normalizer);
                };
            } else {
                gen = [&](const sim::SeqRecord& rec) {
                    return rollout(rec_base, rec.seq.configs.at(0), ds.normalizer,
                                   rec.seq.id + "-roll");
                };
            }

            double pfm_total = 0, cg_total = 0;
            long included = 0;
            for (const auto& rec : ds.test) {
                try {
                    const sim::Sequence out = gen(rec);
                    const double pfm = hausdorff(rec.seq, out, ds.normalizer);
                    std::optional<double> cg;
                    if (mres.method != "nn") {
                        cg = cg_score(out.configs.back(), pool, ds.normalizer);
                        cg_total += *cg;
                    }
                    pfm_total += pfm;
                    ++included;
                    report.details.push_back({mres.method, seed, rec.seq.id, pfm, cg});
                } catch (const Error&) {
                    ++mres.excluded;
                }
            }
            if (included == 0) {
                report.complete = false;
                continue;
            }
            mres.pfm_by_seed.push_back(pfm_total / included);
            if (mres.method != "nn") mres.cg_by_seed.push_back(cg_total / included);
        }
    }

    for (auto& mres : report.methods) {
        if (mres.pfm_by_seed.empty()) {
            report.complete = false;
            continue;
        }
        mres.pfm_median = median(mres.pfm_by_seed);
        if (!mres.cg_by_seed.empty()) mres.cg_median = median(mres.cg_by_seed);
    }
    return report;
}

std::vector<std::string> check_orderings(const MetricReport& report) {
    std::vector<std::string> violations;
    const MethodResult* full = report.find("full");
    const MethodResult* noven = report.find("no_verifier");
    const MethodResult* nn = report.find("nn");
    const MethodResult* rec = report.find("recurrent");
    if (!full || !noven || !nn || !rec) {
        violations.push_back("ordering checks need methods full, no_verifier, nn, recurrent");
        return violations;
    }
    if (!report.complete) violations.push_back("report is incomplete");

    char buf[160];
    if (!(full->cg_median && noven->cg_median && *full->cg_median > *noven->cg_median)) {
        std::snprintf(buf, sizeof buf, "goal capture: full %.4f must exceed no_verifier %.4f",
                      full->cg_median.value_or(-1), noven->cg_median.value_or(-1));
        violations.push_back(buf);
    }
    if (!(full->pfm_median < nn->pfm_median)) {
        std::snprintf(buf, sizeof buf, "future motion: full %.4f must undercut nn %.4f",
                      full->pfm_median, nn->pfm_median);
        violations.push_back(buf);
    }
    if (!(full->pfm_median < rec->pfm_median)) {
        std::snprintf(buf, sizeof buf, "future motion: full %.4f must undercut recurrent %.4f",
                      full->pfm_median, rec->pfm_median);
        violations.push_back(buf);
    }
    if (!(std::abs(full->pfm_median - noven->pfm_median) <= 0.1 * full->pfm_median)) {
        std::snprintf(buf, sizeof buf,
                      "future motion: full %.4f and no_verifier %.4f must agree within 10%%",
                      full->pfm_median, noven->pfm_median);
        violations.push_back(buf);
    }
    return violations;
}

std::string format_report(const MetricReport& report) {
    std::string out = "dataset " + report.dataset_id + "\nseeds";
    for (const auto s : report.seeds) out += " " + std::to_string(s);
    out += "\n\n";

    char line[128];
    std::snprintf(line, sizeof line, "%-14s %10s %10s %10s\n", "method", "PFM", "CG", "excluded");
    out += line;
    for (const auto& m : report.methods) {
        char cg[32] = "-";
        if (m.cg_median) std::snprintf(cg, sizeof cg, "%.4f", *m.cg_median);
        std::snprintf(line, sizeof line, "%-14s %10.4f %10s %10d\n", m.method.c_str(),
                      m.pfm_median, cg, m.excluded);
        out += line;
    }
    if (!report.complete) out += "\nwarning: one or more methods produced no sequences\n";
    return out;
}

void save_report(const std::string& table_path, const std::string& detail_path,
                 const MetricReport& report) {
    io::write_file_atomic(table_path, format_report(report));

    std::string out = io::header_line("egosynth-report", 1) + "\n";
    for (const auto& d : report.details) {
        out += "{\"method\":\"" + d.method + "\",\"seed\":" + std::to_string(d.seed);
        out += ",\"id\":\"" + d.id + "\",\"pfm\":" + io::format_double(d.pfm);
        if (d.cg) out += ",\"cg\":" + io::format_double(*d.cg);
        out += "}\n";
    }
    io::write_file_atomic(detail_path, out);
}

}  // namespace egosynth::eval
