#pragma once

#include <cstdint>
#include <vector>

namespace aoisched {

/// One decimated point on a learning curve: the running time-average cost
/// after `step` environment slots of run `run`.
struct CurvePoint {
    int run = 0;
    std::uint64_t step = 0;
    double running_avg_cost = 0.0;
};

/// Output of one training run (or an aggregate over runs): the learning
/// curve, the final performance estimate, and enough provenance (seed,
/// resolved-config fingerprint) to reproduce the file it lands in.
struct RunRecord {
    std::vector<CurvePoint> curve;
    double final_avg_cost = 0.0;  ///< evaluation-time estimate, not the running average
    std::uint64_t total_steps = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_fingerprint = 0;
};

}  // namespace aoisched
