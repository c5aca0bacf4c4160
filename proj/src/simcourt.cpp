#include "egosynth/simcourt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"

namespace egosynth::sim {

namespace {

using geom::CameraConfig;
using geom::Mat3;
using geom::Vec2;
using geom::Vec3;

constexpr double kPi = std::numbers::pi;
constexpr double kStartClearance = 5.0;  // start at least this far from the basket
constexpr double kDefenderHead = 1.7;

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

/// Time warp for drive progress: mostly smoothstep, with a linear term so the
// finish keeps speed and end-phase frames stay spatially distinct.
double drive_warp(double s) { return 0.75 * smoothstep(s) + 0.25 * s; }

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a < -kPi) a += 2.0 * kPi;
    return a;
}

double hypot2(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

Vec2 bezier(const Vec2& p0, const Vec2& p1, const Vec2& p2, double u) {
    const double w0 = (1.0 - u) * (1.0 - u);
    const double w1 = 2.0 * u * (1.0 - u);
    const double w2 = u * u;
    return {w0 * p0[0] + w1 * p1[0] + w2 * p2[0], w0 * p0[1] + w1 * p1[1] + w2 * p2[1]};
}

// Camera axes: x right, y down, z forward; no roll (x stays horizontal).
Mat3 look_rotation(const Vec3& forward) {
    Vec3 x = geom::cross(forward, Vec3{0, 0, 1});
    const double n = geom::norm(x);
    if (n < 1e-9) throw DegeneracyError("optical axis is vertical");
    x = geom::scale(x, 1.0 / n);
    const Vec3 y = geom::cross(forward, x);
    return {x[0], x[1], x[2], y[0], y[1], y[2], forward[0], forward[1], forward[2]};
}

CameraConfig config_from(const Vec3& center, const Vec3& forward) {
    geom::Pose pose;
    pose.rotation = look_rotation(forward);
    pose.translation = geom::scale(geom::mat_vec(pose.rotation, center), -1.0);
    return geom::flatten_pose(pose);
}

struct DriveSetup {
    int frames = 0;
    double head_z = 0.0;
    Vec2 start{}, ctrl{}, end{};
    Vec2 defender{};
};

DriveSetup sample_drive(const SimParams& p, Rng& rng) {
    DriveSetup d;
    d.frames = static_cast<int>(rng.uniform_int(p.min_length, p.max_length));
    d.head_z = rng.uniform(p.head_min, p.head_max);

    for (int tries = 0;; ++tries) {
        d.start = {rng.uniform(0.5, p.court_x - 0.5), rng.uniform(0.5, p.court_y - 0.5)};
        if (hypot2(d.start[0] - p.basket[0], d.start[1] - p.basket[1]) >= kStartClearance) break;
        if (tries > 1000) throw DegeneracyError("cannot place a start away from the basket");
    }

    const double angle = rng.uniform(20.0 * kPi / 180.0, 160.0 * kPi / 180.0);
    const double radius = rng.uniform(1.0, 2.2);
    d.end = {p.basket[0] + radius * std::cos(angle), p.basket[1] + radius * std::sin(angle)};

    const Vec2 chord{d.end[0] - d.start[0], d.end[1] - d.start[1]};
    const double clen = std::max(hypot2(chord[0], chord[1]), 1e-9);
    const Vec2 perp{-chord[1] / clen, chord[0] / clen};

    const double along = rng.uniform(0.35, 0.65);
    const double across = rng.uniform(-0.8, 0.8);
    d.defender = {d.start[0] + along * chord[0] + across * perp[0],
                  d.start[1] + along * chord[1] + across * perp[1]};

    // Bow the drive away from whichever side the defender occupies.
    const double cross2 = chord[0] * (d.defender[1] - d.start[1]) -
                          chord[1] * (d.defender[0] - d.start[0]);
    const double side = cross2 >= 0.0 ? -1.0 : 1.0;
    const double amount = p.deflection * rng.uniform(0.8, 1.2);
    d.ctrl = {d.start[0] + 0.5 * chord[0] + side * amount * perp[0],
              d.start[1] + 0.5 * chord[1] + side * amount * perp[1]};
    return d;
}

SeqRecord build_drive(const SimParams& p, Rng& rng, const std::string& id, const DriveSetup& d) {
    SeqRecord rec;
    rec.seq.id = id;
    const int m = d.frames;
    for (int i = 1; i <= m; ++i) {
        const double s = normalized_time(i, m);
        const double fade = 1.0 - s;
        const double u = drive_warp(s);

        Vec2 xy = bezier(d.start, d.ctrl, d.end, u);
        xy[0] = std::clamp(xy[0] + fade * p.position_noise * rng.normal(), 0.25, p.court_x - 0.25);
        xy[1] = std::clamp(xy[1] + fade * p.position_noise * rng.normal(), 0.25, p.court_y - 0.25);
        const Vec3 center{xy[0], xy[1], d.head_z};

        const double w = smoothstep(std::clamp((s - 0.25) / 0.5, 0.0, 1.0));
        Vec3 gaze{(1.0 - w) * d.defender[0] + w * p.basket[0],
                  (1.0 - w) * d.defender[1] + w * p.basket[1],
                  (1.0 - w) * kDefenderHead + w * p.basket[2]};
        if (geom::norm(geom::sub(gaze, center)) < 0.5) gaze = p.basket;

        const Vec3 to_gaze = geom::sub(gaze, center);
        double yaw = std::atan2(to_gaze[1], to_gaze[0]);
        double pitch = std::asin(to_gaze[2] / geom::norm(to_gaze));
        yaw += fade * p.gaze_noise * rng.normal();
        pitch = std::clamp(pitch + 0.5 * fade * p.gaze_noise * rng.normal(), -1.2, 1.2);
        const Vec3 forward{std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
                           std::sin(pitch)};

        const CameraConfig config = config_from(center, forward);
        rec.seq.configs.push_back(config);

        Observation obs(static_cast<std::size_t>(p.d_obs), 0.0);
        const double sigma = p.observation_noise;
        for (int k = 0; k < 12; ++k) obs[k] = config[k] + sigma * rng.normal();
        obs[12] = d.defender[0] - center[0] + sigma * rng.normal();
        obs[13] = d.defender[1] - center[1] + sigma * rng.normal();
        obs[14] = std::atan2(center[1] - d.defender[1], center[0] - d.defender[0]) +
                  sigma * rng.normal();
        obs[15] = wrap_angle(std::atan2(p.basket[1] - center[1], p.basket[0] - center[0]) - yaw) +
                  sigma * rng.normal();
        obs[16] = geom::norm(geom::sub(p.basket, center)) + sigma * rng.normal();
        obs[17] = std::min(std::min(center[0], p.court_x - center[0]),
                           std::min(center[1], p.court_y - center[1])) +
                  sigma * rng.normal();
        rec.observations.push_back(std::move(obs));
    }
    return rec;
}

bool drive_ok(const SimParams& p, const SeqRecord& rec) {
    if (rec.seq.length() < 2) return false;
    for (const auto& c : rec.seq.configs) {
        if (!geom::all_finite(c)) return false;
        geom::Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[3 * i + j] = c[4 * i + j];
        if (!geom::is_rotation(r)) return false;
    }
    if (max_center_step(rec.seq) >= kMaxStepMeters) return false;
    return in_goal_region(rec.seq.configs.back(), p);
}

std::string sequence_record_json(const SeqRecord& rec) {
    std::string out = "{\"id\":\"" + rec.seq.id + "\",\"configs\":[";
    for (std::size_t i = 0; i < rec.seq.configs.size(); ++i) {
        if (i) out += ',';
        out += io::format_array(rec.seq.configs[i].v);
    }
    out += "],\"observations\":[";
    for (std::size_t i = 0; i < rec.observations.size(); ++i) {
        if (i) out += ',';
        out += io::format_array(rec.observations[i]);
    }
    out += "]}";
    return out;
}

void append_id_list(std::string& out, const std::vector<SeqRecord>& records) {
    out += '[';
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i) out += ',';
        out += '"' + records[i].seq.id + '"';
    }
    out += ']';
}

}  // namespace

void SimParams::validate() const {
    if (court_x <= 0 || court_y <= 0) throw ValidationError("court dimensions must be positive");
    if (min_length < 2 || max_length < min_length)
        throw ValidationError("sequence length range must satisfy 2 <= min <= max");
    if (count <= 0) throw ValidationError("sequence count must be positive");
    if (split <= 0.0 || split >= 1.0) throw ValidationError("split fraction must be in (0,1)");
    if (head_min <= 0.0 || head_max < head_min)
        throw ValidationError("head-height range must satisfy 0 < min <= max");
    if (deflection < 0 || position_noise < 0 || gaze_noise < 0 || observation_noise < 0)
        throw ValidationError("noise scales must be non-negative");
    if (d_obs < 18) throw ValidationError("observation dimension must be at least 18");
    if (basket[2] <= 0) throw ValidationError("basket must be above the floor");
}

double normalized_time(std::size_t i, std::size_t m) {
    if (m == 0) throw ValidationError("sequence length must be positive");
    if (i > m) throw ValidationError("frame index exceeds sequence length");
    return static_cast<double>(i) / static_cast<double>(m);
}

bool in_goal_region(const geom::CameraConfig& config, const SimParams& params) {
    const Vec3 center = geom::camera_center(config);
    if (hypot2(center[0] - params.basket[0], center[1] - params.basket[1]) > kGoalRadiusMeters)
        return false;
    const Vec3 axis{config[8], config[9], config[10]};  // third rotation row: optical axis
    const Vec3 bearing = geom::sub(params.basket, center);
    const double bn = geom::norm(bearing);
    if (bn < 1e-9) return true;
    const double cosang =
        std::clamp(geom::dot(axis, bearing) / (bn * geom::norm(axis)), -1.0, 1.0);
    return std::acos(cosang) <= kGoalFacingDegrees * kPi / 180.0;
}

double max_center_step(const Sequence& seq) {
    double worst = 0.0;
    for (std::size_t i = 1; i < seq.configs.size(); ++i) {
        const Vec3 a = geom::camera_center(seq.configs[i - 1]);
        const Vec3 b = geom::camera_center(seq.configs[i]);
        worst = std::max(worst, geom::norm(geom::sub(b, a)));
    }
    return worst;
}

void validate_sequence(const Sequence& seq) {
    if (seq.length() < 2) throw ValidationError("sequence needs at least 2 frames");
    for (const auto& c : seq.configs) geom::decompose(c, geom::RotationCheck::Strict);
    if (max_center_step(seq) >= kMaxStepMeters)
        throw ValidationError("consecutive camera centers exceed the step bound");
}

SeqRecord generate_sequence(const SimParams& params, Rng& rng, const std::string& id) {
    params.validate();
    for (int attempt = 0; attempt < 100; ++attempt) {
        const DriveSetup d = sample_drive(params, rng);
        SeqRecord rec = build_drive(params, rng, id, d);
        if (drive_ok(params, rec)) return rec;
    }
    throw DegeneracyError("simulator failed to produce a valid drive");
}

Dataset generate_dataset(const SimParams& params) {
    params.validate();
    Dataset ds;
    ds.params = params;
    ds.id = "sim-" + std::to_string(params.seed) + "-" + std::to_string(params.count);

    std::vector<SeqRecord> all;
    all.reserve(params.count);
    for (int idx = 0; idx < params.count; ++idx) {
        Rng child(derive_seed(params.seed, static_cast<std::uint64_t>(idx)));
        char name[32];
        std::snprintf(name, sizeof(name), "seq-%04d", idx);
        all.push_back(generate_sequence(params, child, name));
    }

    int n_train = static_cast<int>(std::lround(params.split * params.count));
    if (params.count >= 2) n_train = std::clamp(n_train, 1, params.count - 1);

    std::vector<int> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(derive_seed(params.seed, 0xA5A5A5A5ULL));
    for (std::size_t i = order.size(); i-- > 1;) {
        const std::size_t j = shuffle_rng.index(i + 1);
        std::swap(order[i], order[j]);
    }

    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> test_idx(order.begin() + n_train, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    for (int i : train_idx) ds.train.push_back(std::move(all[i]));
    for (int i : test_idx) ds.test.push_back(std::move(all[i]));

    std::vector<CameraConfig> train_configs;
    for (const auto& rec : ds.train)
        train_configs.insert(train_configs.end(), rec.seq.configs.begin(), rec.seq.configs.end());
    ds.normalizer = geom::fit_normalizer(train_configs);
    return ds;
}

double start_cell_coverage(const Dataset& dataset) {
    const int nx = std::max(1, static_cast<int>(std::floor(dataset.params.court_x)));
    const int ny = std::max(1, static_cast<int>(std::floor(dataset.params.court_y)));
    std::set<int> covered;
    auto visit = [&](const std::vector<SeqRecord>& recs) {
        for (const auto& rec : recs) {
            const Vec3 c = geom::camera_center(rec.seq.configs.front());
            const int cx = std::clamp(static_cast<int>(std::floor(c[0])), 0, nx - 1);
            const int cy = std::clamp(static_cast<int>(std::floor(c[1])), 0, ny - 1);
            covered.insert(cy * nx + cx);
        }
    };
    visit(dataset.train);
    visit(dataset.test);
    return static_cast<double>(covered.size()) / static_cast<double>(nx * ny);
}

void save_sequence_file(const std::string& path, const std::vector<SeqRecord>& records) {
    std::string out = io::header_line("egosynth-seq", 1) + "\n";
    for (const auto& rec : records) out += sequence_record_json(rec) + "\n";
    io::write_file_atomic(path, out);
}

std::vector<SeqRecord> load_sequence_file(const std::string& path, int expect_d_obs) {
    const auto lines = io::split_lines(io::read_file(path));
    if (lines.empty() || lines[0].empty()) throw ParseError("missing header", 1);
    io::expect_header(io::parse_line(lines[0], 1), "egosynth-seq", 1, 1);

    std::vector<SeqRecord> records;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const int lineno = static_cast<int>(li) + 1;
        const nlohmann::json j = io::parse_line(lines[li], lineno);
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
            throw ParseError("sequence record needs a string id", lineno);
        SeqRecord rec;
        rec.seq.id = j["id"].get<std::string>();

        if (!j.contains("configs") || !j["configs"].is_array())
            throw ParseError("missing configs array", lineno);
        for (const auto& row : j["configs"]) {
            if (!row.is_array() || row.size() != 12)
                throw ParseError("config has " + std::to_string(row.size()) +
                                     " entries, want 12",
                                 lineno);
            CameraConfig c;
            for (int k = 0; k < 12; ++k) {
                if (!row[k].is_number()) throw ParseError("non-numeric config entry", lineno);
                c[k] = row[k].get<double>();
            }
            if (!geom::all_finite(c)) throw ParseError("non-finite config entry", lineno);
            rec.seq.configs.push_back(c);
        }
        if (rec.seq.configs.empty()) throw ParseError("sequence has no configs", lineno);

        if (!j.contains("observations") || !j["observations"].is_array())
            throw ParseError("missing observations array", lineno);
        const auto& jobs = j["observations"];
        if (!jobs.empty() && jobs.size() != rec.seq.configs.size())
            throw ParseError("observations not aligned with configs", lineno);
        for (const auto& row : jobs) {
            if (!row.is_array() ||
                (expect_d_obs > 0 && row.size() != static_cast<std::size_t>(expect_d_obs)))
                throw ParseError("observation has " + std::to_string(row.size()) +
                                     " entries, want " + std::to_string(expect_d_obs),
                                 lineno);
            Observation o;
            for (const auto& v : row) {
                if (!v.is_number()) throw ParseError("non-numeric observation entry", lineno);
                o.push_back(v.get<double>());
            }
            rec.observations.push_back(std::move(o));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void save_sequences(const std::string& dir, const Dataset& dataset) {
    std::filesystem::create_directories(dir);
    save_sequence_file(dir + "/train.jsonl", dataset.train);
    save_sequence_file(dir + "/test.jsonl", dataset.test);

    const SimParams& p = dataset.params;
    std::string m = "{\"format\":\"egosynth-manifest\",\"version\":1,\"id\":\"" + dataset.id +
                    "\",\"params\":{";
    m += "\"court_x\":" + io::format_double(p.court_x);
    m += ",\"court_y\":" + io::format_double(p.court_y);
    m += ",\"basket\":" + io::format_array(p.basket);
    m += ",\"min_length\":" + std::to_string(p.min_length);
    m += ",\"max_length\":" + std::to_string(p.max_length);
    m += ",\"count\":" + std::to_string(p.count);
    m += ",\"split\":" + io::format_double(p.split);
    m += ",\"head_min\":" + io::format_double(p.head_min);
    m += ",\"head_max\":" + io::format_double(p.head_max);
    m += ",\"deflection\":" + io::format_double(p.deflection);
    m += ",\"position_noise\":" + io::format_double(p.position_noise);
    m += ",\"gaze_noise\":" + io::format_double(p.gaze_noise);
    m += ",\"observation_noise\":" + io::format_double(p.observation_noise);
    m += ",\"d_obs\":" + std::to_string(p.d_obs);
    m += ",\"seed\":" + std::to_string(p.seed);
    m += "},\"normalizer\":{\"mean\":" + io::format_array(dataset.normalizer.mean);
    m += ",\"std\":" + io::format_array(dataset.normalizer.stddev);
    m += "},\"train_ids\":";
    append_id_list(m, dataset.train);
    m += ",\"test_ids\":";
    append_id_list(m, dataset.test);
    m += "}\n";
    io::write_file_atomic(dir + "/manifest.json", m);
}

Dataset load_sequences(const std::string& dir) {
    const auto lines = io::split_lines(io::read_file(dir + "/manifest.json"));
    if (lines.empty() || lines[0].empty()) throw ParseError("missing header", 1);
    const nlohmann::json j = io::parse_line(lines[0], 1);
    io::expect_header(j, "egosynth-manifest", 1, 1);

    Dataset ds;
    if (!j.contains("id") || !j["id"].is_string())
        throw ParseError("manifest needs a dataset id", 1);
    ds.id = j["id"].get<std::string>();

    if (!j.contains("params") || !j["params"].is_object())
        throw ParseError("manifest needs generation params", 1);
    const auto& jp = j["params"];
    SimParams p;
    try {
        p.court_x = jp.at("court_x").get<double>();
        p.court_y = jp.at("court_y").get<double>();
        const auto basket = io::get_double_array(jp, "basket", 3, 1);
        p.basket = {basket[0], basket[1], basket[2]};
        p.min_length = jp.at("min_length").get<int>();
        p.max_length = jp.at("max_length").get<int>();
        p.count = jp.at("count").get<int>();
        p.split = jp.at("split").get<double>();
        p.head_min = jp.at("head_min").get<double>();
        p.head_max = jp.at("head_max").get<double>();
        p.deflection = jp.at("deflection").get<double>();
        p.position_noise = jp.at("position_noise").get<double>();
        p.gaze_noise = jp.at("gaze_noise").get<double>();
        p.observation_noise = jp.at("observation_noise").get<double>();
        p.d_obs = jp.at("d_obs").get<int>();
        p.seed = jp.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad params block: ") + e.what(), 1);
    }
    try {
        p.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), 1);
    }
    ds.params = p;

    if (!j.contains("normalizer") || !j["normalizer"].is_object())
        throw ParseError("manifest needs a normalizer", 1);
    const auto mean = io::get_double_array(j["normalizer"], "mean", 12, 1);
    const auto stddev = io::get_double_array(j["normalizer"], "std", 12, 1);
    for (int d = 0; d < 12; ++d) {
        ds.normalizer.mean[d] = mean[d];
        ds.normalizer.stddev[d] = stddev[d];
        if (!(stddev[d] > 0.0)) throw ParseError("normalizer std must be positive", 1);
    }

    auto read_ids = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array())
            throw ParseError(std::string("manifest needs ") + key, 1);
        std::vector<std::string> ids;
        for (const auto& v : j[key]) {
            if (!v.is_string()) throw ParseError("non-string sequence id", 1);
            ids.push_back(v.get<std::string>());
        }
        return ids;
    };
    const auto train_ids = read_ids("train_ids");
    const auto test_ids = read_ids("test_ids");

    ds.train = load_sequence_file(dir + "/train.jsonl", p.d_obs);
    ds.test = load_sequence_file(dir + "/test.jsonl", p.d_obs);

    auto check_ids = [](const std::vector<SeqRecord>& recs, const std::vector<std::string>& ids,
                        const char* which) {
        if (recs.size() != ids.size())
            throw ParseError(std::string(which) + " file does not match manifest id list", 1);
        for (std::size_t i = 0; i < recs.size(); ++i)
            if (recs[i].seq.id != ids[i])
                throw ParseError(std::string(which) + " file order does not match manifest", 1);
    };
    check_ids(ds.train, train_ids, "train");
    check_ids(ds.test, test_ids, "test");

    for (const auto& rec : ds.train)
        if (rec.observations.empty())
            throw ParseError("dataset sequences need observations", 1);
    for (const auto& rec : ds.test)
        if (rec.observations.empty())
            throw ParseError("dataset sequences need observations", 1);
    return ds;
}

}  // namespace egosynth::sim
