#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "roughflow/geometry.hpp"
#include "roughflow/ode_engine.hpp"

namespace roughflow {

struct VerifySuiteResult {
    std::string name;
    bool pass = false;
    nlohmann::json details;
};

/// Median |central-difference divergence| relative to the local gradient
/// scale over interior points of every region of b_eps, plus exact zeros on
/// exterior points.
VerifySuiteResult verify_divergence(const ApproxParams& params, int per_region, std::uint64_t seed);

/// max |b . n| over sampled points of every boundary surface (paraboloids,
/// cylinder wall, both lateral transition surfaces, and the limit paraboloid).
VerifySuiteResult verify_tangency(const ApproxParams& params, int per_surface, std::uint64_t seed);

/// Conserved-ratio drift along closed-form limit trajectories (machine
/// precision) and along engine trajectories of b_eps within paraboloid
/// segments.
VerifySuiteResult verify_conserved(const ApproxParams& params, double theta, int trajectories,
                                   std::uint64_t seed, const IntegratorConfig& cfg);

/// Per-segment Jacobian determinant drift along b_eps trajectories crossing
/// all five regions, plus a rigid-rotation control.
VerifySuiteResult verify_volume(const ApproxParams& params, int trajectories, std::uint64_t seed,
                                const IntegratorConfig& cfg);

}  // namespace roughflow
