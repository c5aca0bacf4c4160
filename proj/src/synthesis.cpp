#include "egosynth/synthesis.hpp"

#include <cmath>
#include <string>

#include "egosynth/errors.hpp"
#include "egosynth/jsonio.hpp"

namespace egosynth::synth {

namespace {

double sq_dist(const geom::CameraConfig& a, const geom::CameraConfig& b) {
    double s = 0;
    for (int i = 0; i < 12; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

void SynthesisOptions::validate(int k) const {
    if (k < 1) throw ValidationError("branch count must be at least 1");
    if (iterations < k) throw ValidationError("iteration count must be at least the branch count");
    if (step <= 0.0) throw ValidationError("step size must be positive");
    if (m_out < 2) throw ValidationError("extracted length must be at least 2");
}

int branch_schedule(long c, long n, int k) {
    if (n < 1 || k < 1) throw ValidationError("schedule needs positive iteration and branch counts");
    if (c < 0 || c >= n) throw ValidationError("schedule iteration outside [0, N)");
    const long j = c * k / n + 1;
    return static_cast<int>(std::clamp(j, 1L, static_cast<long>(k)));
}

double objective(const geom::CameraConfig& h, const geom::CameraConfig& phi,
                 const model::GoalVerifier& verifier) {
    return sq_dist(phi, h) - model::verifier_log_score(verifier, h);
}

std::array<double, 12> objective_grad(const geom::CameraConfig& h, const geom::CameraConfig& phi,
                                      const model::GoalVerifier& verifier) {
    std::array<double, 12> lg{};
    model::verifier_log_score(verifier, h, &lg);
    std::array<double, 12> g{};
    for (int i = 0; i < 12; ++i) g[i] = -2.0 * (phi[i] - h[i]) - lg[i];
    return g;
}

SynthesisTrace synthesize(const geom::CameraConfig& start,
                          const std::vector<geom::CameraConfig>& phis,
                          const model::GoalVerifier* verifier, const SynthesisOptions& opts) {
    const int k = static_cast<int>(phis.size());
    opts.validate(k);
    if (!geom::all_finite(start)) throw ValidationError("non-finite start configuration");
    for (const auto& phi : phis)
        if (!geom::all_finite(phi)) throw ValidationError("non-finite branch target");

    const long n = opts.iterations;
    SynthesisTrace trace;
    trace.iterates.reserve(n + 1);
    trace.objectives.reserve(n + 1);
    trace.iterates.push_back(start);

    int prev_branch = 0;
    for (long c = 0; c < n; ++c) {
        const int j = branch_schedule(c, n, k);
        if (j != prev_branch) {
            trace.phase_starts.push_back(c);
            prev_branch = j;
        }
        const geom::CameraConfig& h = trace.iterates.back();
        const geom::CameraConfig& phi = phis[j - 1];

        std::array<double, 12> lg{};
        double log_psi = 0.0;
        if (verifier) log_psi = model::verifier_log_score(*verifier, h, &lg);
        trace.objectives.push_back(sq_dist(phi, h) - log_psi);

        geom::CameraConfig next;
        for (int i = 0; i < 12; ++i)
            next.v[i] = h[i] - opts.step * (-2.0 * (phi[i] - h[i]) - lg[i]);
        if (!geom::all_finite(next))
            throw DivergenceError("synthesis produced a non-finite iterate", c + 1);
        trace.iterates.push_back(next);
    }

    const geom::CameraConfig& last = trace.iterates.back();
    const double log_psi = verifier ? model::verifier_log_score(*verifier, last) : 0.0;
    trace.objectives.push_back(sq_dist(phis[k - 1], last) - log_psi);
    return trace;
}

sim::Sequence extract_sequence(const SynthesisTrace& trace, int m_out,
                               const geom::Normalizer& normalizer, const std::string& id) {
    const long n = static_cast<long>(trace.iterates.size()) - 1;
    if (n < 0) throw ValidationError("empty trace");
    if (m_out < 2) throw ValidationError("extracted length must be at least 2");
    if (m_out > n + 1) throw ValidationError("extracted length exceeds the trace length");

    sim::Sequence seq;
    seq.id = id;
    seq.configs.reserve(m_out);
    for (int t = 0; t < m_out; ++t) {
        const long c = std::lround(static_cast<double>(t) * n / (m_out - 1));
        const geom::CameraConfig raw = geom::denormalize(trace.iterates[c], normalizer);
        seq.configs.push_back(geom::flatten_pose(geom::decompose(raw, geom::RotationCheck::Lenient)));
    }
    return seq;
}

void save_trace(const std::string& path, const SynthesisTrace& trace) {
    std::string out = io::header_line("egosynth-trace", 1) + "\n";
    for (std::size_t c = 0; c < trace.iterates.size(); ++c) {
        out += "{\"c\":" + std::to_string(c);
        out += ",\"h\":" + io::format_array(trace.iterates[c].v);
        out += ",\"objective\":" + io::format_double(trace.objectives[c]);
        bool phase = false;
        for (long p : trace.phase_starts) phase = phase || p == static_cast<long>(c);
        if (phase) out += ",\"phase_start\":true";
        out += "}\n";
    }
    io::write_file_atomic(path, out);
}

}  // namespace egosynth::synth
