#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "caustiq/arc1d.hpp"
#include "caustiq/caustic.hpp"
#include "caustiq/classical.hpp"
#include "caustiq/eigensolver.hpp"
#include "caustiq/model.hpp"
#include "caustiq/oracle.hpp"

namespace caustiq::io {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Effective settings for one command run.  Defaults describe the coupled
 *  well studied throughout (omega = (1.1, 1), lambda = -0.11, m = hbar = 1);
 *  a JSON config file and command-line flags override individual fields.
 *  Unknown config keys are rejected. */
struct RunConfig {
    model::HamiltonianModel model;
    eigensolver::PipelineOptions pipeline;  // carries the caustic build knobs
    int oracle_n_max = 30;
    int surface_grid = 121;     // nodes per axis of the action sheets
    double energy = 0.0;        // trace
    double e_max = 0.0;         // spectrum
    double start_angle = 0.785398163397448279;  // trace: vertex direction
    int state_m = -1, state_n = -1;
    int arc_k = 3;              // 1..4; the figures use the right arc
    std::string out_dir = ".";

    RunConfig() {
        model.omega_x = 1.1;
        model.omega_y = 1.0;
        model.lambda = -0.11;
    }
};

/// Parse a JSON config file over `base`; throws ConfigError on any problem.
RunConfig load_config(const std::string& path, RunConfig base = {});

/// The full effective config, for provenance blocks in reports.
std::string config_to_json(const RunConfig& cfg);

// ---- decimal formatting -------------------------------------------------
// All emitted decimals use 17 significant digits so that parsing returns
// the identical double and identical inputs give byte-identical files.

std::string fmt(double v);

// ---- CSV ----------------------------------------------------------------

void write_trajectory_csv(const std::string& path,
                          const classical::Trajectory& traj);

void write_cloud_csv(const std::string& path,
                     const classical::CausticPointCloud& cloud);

/** Per-node arc bundle: parameter, psi, X, Y, U_k, g; an extra psi_oracle
 *  column when a reference profile on the same grid is supplied. */
void write_arc_csv(const std::string& path, const arc1d::ArcProblem& prob,
                   const arc1d::ArcSolution& sol,
                   const std::vector<double>* psi_oracle = nullptr);

/** Row-major surface samples as x,y,value rows; a false mask entry leaves
 *  the value field empty (point outside the domain, never extrapolated). */
void write_surface_csv(const std::string& path, const std::vector<double>& xs,
                       const std::vector<double>& ys,
                       const std::vector<double>& values,
                       const std::vector<bool>* present = nullptr);

/** Spectrum summary rows E,m,n,E_oracle,abs_dE sorted by energy; states
 *  without an oracle label match leave the last two fields empty. */
void write_comparison_csv(const std::string& path,
                          const eigensolver::ScanReport& report,
                          const oracle::OracleResult* oracle);

// ---- JSON ---------------------------------------------------------------

/// Round-trips bit-exactly through parse_caustic (keys sorted, 2-space indent).
std::string caustic_to_json(const caustic::Caustic& c);
caustic::Caustic parse_caustic(const std::string& text);

/** Full scan report with the effective config embedded, each entry carrying
 *  its serialized caustic, defects and quantization residuals. */
std::string spectrum_to_json(const eigensolver::ScanReport& report,
                             const RunConfig& cfg,
                             const oracle::OracleResult* oracle);

std::string oracle_to_json(const oracle::OracleResult& r);

/// Write a whole file at once; throws std::runtime_error on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace caustiq::io
