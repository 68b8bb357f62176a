#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughflow/fields.hpp"
#include "roughflow/geometry.hpp"
#include "roughflow/ode_engine.hpp"
#include "roughflow/transport.hpp"

namespace roughflow {

// =============================================================================
// Configuration
// =============================================================================

struct SampleSpec {
    int count = 50;
    std::uint64_t seed = 1;
    double z_max = 1.2;      ///< starts drawn with |z| up to this height
    double ratio_max = 0.9;  ///< conserved-ratio cap, keeps starts off the paraboloid wall
};

struct GridSpec {
    double radius = 2.0;
    int n = 64;
};

struct ExperimentConfig {
    std::string id;
    double theta = 1.5707963267948966;
    double phi = 3.141592653589793;
    std::vector<double> eps_schedule{0.2, 0.1, 0.05, 0.025};
    std::vector<double> delta_schedule{0.05, 0.02, 0.01};
    double horizon = 0.5;
    SampleSpec samples;
    GridSpec grid;
    IntegratorConfig integrator;
    int threads = 1;
    std::string out_dir;  ///< empty: in-memory only

    void validate(bool needs_two_angles = false) const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Strict parse: unknown keys and bad types are rejected (std::invalid_argument).
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Least-squares slope and intercept of log(err) against log(eps).
std::pair<double, double> fit_loglog(const std::vector<double>& eps,
                                     const std::vector<double>& err);

/// Uniform time grid over [0, T] with step at most dt.
std::vector<double> make_time_grid(double T, double dt);

// =============================================================================
// Reports
// =============================================================================

struct ConvergenceReport {
    ExperimentConfig config;
    std::vector<double> eps;
    std::vector<double> errors;
    std::vector<double> errors_z;       // inverse experiment: third component
    std::vector<double> errors_planar;  // inverse experiment: planar part
    double slope = 0.0;
    double intercept = 0.0;
    double slope_z = 0.0;
    double cross_check_max = 0.0;  ///< closed form vs engine on spot-checked samples
    double cross_check_budget = 0.0;
    int engine_failures = 0;
    int time_grid_points = 0;
    bool pass = false;
    std::vector<std::string> notes;
    std::uint64_t manifest_hash = 0;

    nlohmann::json to_json() const;
};

struct NonuniquenessReport {
    ExperimentConfig config;
    std::vector<double> eps;
    std::vector<double> d_theta;  ///< l1(u^eps_theta, u_theta) at t = T
    std::vector<double> d_phi;
    double D = 0.0;         ///< l1(u_theta, u_phi) at t = T
    double D_coarse = 0.0;  ///< same on the coarser grid
    double grid_change = 0.0;
    /// weak-* evidence: pairings of u^eps - u against a fixed bump battery
    std::vector<std::vector<double>> pairing_errors_theta;  // [bump][eps]
    bool pass = false;
    std::vector<std::string> notes;
    std::uint64_t manifest_hash = 0;

    nlohmann::json to_json() const;
};

struct DiagonalMergeReport {
    ExperimentConfig config;
    struct Term {
        int index;
        char angle;  // 'T' for theta, 'P' for phi
        double eps;
        double delta;
        double error_vs_limit;  // l1 against the matching limit solution
    };
    std::vector<Term> terms;
    std::vector<double> consecutive_gaps;  // l1(u_n, u_{n+1})
    double D = 0.0;
    bool even_decreasing = false;
    bool odd_decreasing = false;
    bool gap_bound_holds = false;  // every gap >= D/2
    bool pass = false;
    std::uint64_t manifest_hash = 0;

    nlohmann::json to_json() const;
};

struct Dpl2dReport {
    ExperimentConfig config;
    double max_coincidence_gap = 0.0;   // |X - Xtilde| for t <= y^2/2
    bool signs_differ_after = false;    // first components opposite past the crossing
    double max_ode_residual = 0.0;      // FD residual against the field, off the lines
    bool pass = false;
    std::uint64_t manifest_hash = 0;

    nlohmann::json to_json() const;
};

// =============================================================================
// Drivers
// =============================================================================

ConvergenceReport run_flow_convergence(const ExperimentConfig& cfg);
ConvergenceReport run_inverse_convergence(const ExperimentConfig& cfg);
NonuniquenessReport run_nonuniqueness(const ExperimentConfig& cfg);
ConvergenceReport run_mollification_stability(const ExperimentConfig& cfg);
DiagonalMergeReport run_diagonal_merge(const ExperimentConfig& cfg);
Dpl2dReport run_dpl2d_demo(const ExperimentConfig& cfg);

// =============================================================================
// Sampling and output helpers
// =============================================================================

/// Seeded low-discrepancy starts in P+_eps (upper = true) or P-_eps for the
/// given eps, with conserved ratio at most spec.ratio_max.
std::vector<Point3> sample_region_starts(const ApproxParams& params, const SampleSpec& spec,
                                         bool upper);

/// Atomic experiment output: write report.json plus named text files into a
/// temp directory, then rename it to out_dir (replacing an existing one).
void write_experiment_outputs(const std::string& out_dir, const nlohmann::json& report,
                              const std::vector<std::pair<std::string, std::string>>& files);

/// Transport solution on a ball grid for an arbitrary field (engine backward
/// characteristics); used by the mollified-sequence experiments.  Points that
/// are clear of the support of b_eps by margin stay put.
GridField sample_field_solution(const Field& f, const ApproxParams& zone_params,
                                const InitialDatum& u0, double R, int n,
                                std::span<const double> times, const IntegratorConfig& cfg,
                                int threads, double clear_margin);

}  // namespace roughflow
