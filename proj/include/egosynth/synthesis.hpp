#pragma once

#include <string>
#include <vector>

#include "egosynth/geometry.hpp"
#include "egosynth/models.hpp"

namespace egosynth::synth {

struct SynthesisOptions {
    long iterations = 6000;  // N
    double step = 0.001;
    int m_out = 25;  // frames kept when extracting a sequence from the trace

    void validate(int k) const;  // throws ValidationError
};

/// Full record of one gradient-descent run: every iterate h(0..N), the
/// objective at each, and the iteration where each branch phase begins.
struct SynthesisTrace {
    std::vector<geom::CameraConfig> iterates;
    std::vector<double> objectives;
    std::vector<long> phase_starts;
};

/// 1-based branch driving iteration c of N under the k-phase schedule.
int branch_schedule(long c, long n, int k);

/// ||phi - h||^2 - log(psi(h)).
double objective(const geom::CameraConfig& h, const geom::CameraConfig& phi,
                 const model::GoalVerifier& verifier);

/// -2 (phi - h) - grad(psi)(h) / psi(h).
std::array<double, 12> objective_grad(const geom::CameraConfig& h, const geom::CameraConfig& phi,
                                      const model::GoalVerifier& verifier);

/// Gradient descent on the free 12-vector h from `start` (normalized space),
/// chasing phis[j-1] on the branch schedule. A null verifier drops the
/// -log(psi) term (the data-term-only ablation). Model parameters are
/// never touched. Throws DivergenceError naming the iteration that first
/// produced a non-finite iterate.
SynthesisTrace synthesize(const geom::CameraConfig& start,
                          const std::vector<geom::CameraConfig>& phis,
                          const model::GoalVerifier* verifier, const SynthesisOptions& opts);

/// m_out iterates sampled uniformly by iteration index (endpoints always
/// kept), denormalized and leniently re-orthonormalized.
sim::Sequence extract_sequence(const SynthesisTrace& trace, int m_out,
                               const geom::Normalizer& normalizer, const std::string& id);

/// Line-delimited trace dump (header, then one record per iterate).
void save_trace(const std::string& path, const SynthesisTrace& trace);

}  // namespace egosynth::synth
