// caustiq: command-line front end for the caustic quantization pipeline.
//
// Subcommands: trace, spectrum, arc, action-surface, oracle.  Every command
// validates its configuration fully and finishes all computation before the
// first output file is opened, so a failed run leaves no partial artifacts.
// Exit codes: 0 success, 2 configuration error, 3 convergence failure,
// 4 pipeline/numerical error.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "caustiq/io.hpp"

namespace fs = std::filesystem;
using namespace caustiq;

namespace {

io::RunConfig validated_model(io::RunConfig cfg) {
    try {
        cfg.model.validate();
    } catch (const std::exception& e) {
        throw io::ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.pipeline.n_grid < 200)
        throw io::ConfigError("config: pipeline.n_grid must be at least 200");
    return cfg;
}

fs::path prepare_out_dir(const io::RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw io::ConfigError("config: cannot create output directory '" +
                              cfg.out_dir + "'");
    return dir;
}

/// Separable seed for a target state: energy split and vertex direction.
std::pair<double, double> seed_for(const model::HamiltonianModel& m, int mq,
                                   int nq) {
    const double ex = m.hbar * m.omega_x * (mq + 0.5);
    const double ey = m.hbar * m.omega_y * (nq + 0.5);
    const double x0 = std::sqrt(2.0 * ex / m.mass) / m.omega_x;
    const double y0 = std::sqrt(2.0 * ey / m.mass) / m.omega_y;
    return {ex + ey, std::atan2(y0, x0)};
}

void require_state(const io::RunConfig& cfg) {
    if (cfg.state_m < 0 || cfg.state_n < 0)
        throw io::ConfigError(
            "config: this command needs a target state (--state M,N)");
}

oracle::OracleResult run_oracle(const io::RunConfig& cfg) {
    if (cfg.oracle_n_max < 1)
        throw io::ConfigError("config: oracle_n_max must be positive");
    const auto basis = oracle::basis_for(cfg.model, cfg.oracle_n_max);
    return oracle::diagonalize(oracle::build_matrix(cfg.model, basis), basis);
}

int cmd_trace(const io::RunConfig& cfg) {
    if (!(cfg.energy > 0.0))
        throw io::ConfigError("config: trace needs a positive --energy");
    const fs::path dir = prepare_out_dir(cfg);

    const auto& b = cfg.pipeline.build;
    const Vec2 direction{std::cos(cfg.start_angle), std::sin(cfg.start_angle)};
    const Vec2 q0 = model::equipotential_point(cfg.model, cfg.energy, direction);
    classical::Trajectory traj;
    classical::JacobiBundle jac;
    classical::integrate_with_jacobi(cfg.model, {q0, {0.0, 0.0}}, b.t_max,
                                     b.step, b.escape_radius, traj, jac);
    const auto cloud = classical::detect_caustic_points(jac, traj);
    const auto caustic =
        caustic::build_caustic(cfg.model, cfg.energy, cfg.start_angle, b);

    io::write_trajectory_csv((dir / "trajectory.csv").string(), traj);
    io::write_cloud_csv((dir / "caustic_points.csv").string(), cloud);
    io::write_file((dir / "caustic.json").string(),
                   io::caustic_to_json(caustic));
    return 0;
}

int cmd_spectrum(const io::RunConfig& cfg) {
    if (!(cfg.e_max > 0.0))
        throw io::ConfigError("config: spectrum needs a positive --e-max");
    if (cfg.e_max > cfg.pipeline.e_max_guard)
        throw io::ConfigError(
            "config: e_max exceeds pipeline.e_max_guard (bound motion only)");
    const fs::path dir = prepare_out_dir(cfg);

    const auto report =
        eigensolver::scan_spectrum(cfg.model, cfg.e_max, cfg.pipeline);
    const auto oracle = run_oracle(cfg);

    io::write_file((dir / "spectrum.json").string(),
                   io::spectrum_to_json(report, cfg, &oracle));
    io::write_comparison_csv((dir / "comparison.csv").string(), report,
                             &oracle);

    const std::size_t attempted = report.entries.size() + report.failures.size();
    for (const auto& f : report.failures)
        std::fprintf(stderr, "seed (%d,%d) E0=%.6f failed: %s\n", f.m, f.n,
                     f.e_seed, f.message.c_str());
    if (attempted > 0 &&
        10 * report.entries.size() < 9 * attempted) {
        std::fprintf(stderr, "spectrum: only %zu of %zu seeds converged\n",
                     report.entries.size(), attempted);
        return 3;
    }
    return 0;
}

int cmd_arc(const io::RunConfig& cfg) {
    require_state(cfg);
    if (cfg.arc_k < 1 || cfg.arc_k > 4)
        throw io::ConfigError("config: --arc must be 1..4");
    const fs::path dir = prepare_out_dir(cfg);

    const auto [e0, s0] = seed_for(cfg.model, cfg.state_m, cfg.state_n);
    const auto entry = eigensolver::find_state(
        cfg.model, e0, s0, std::make_pair(cfg.state_m, cfg.state_n),
        cfg.pipeline);
    const auto& arc = entry.caustic.arcs[cfg.arc_k - 1];
    auto prob =
        arc1d::build_arc_problem(cfg.model, arc, entry.energy, cfg.pipeline.n_grid);
    auto sol = arc1d::solve_arc(prob);
    arc1d::quantum_action(sol, prob);

    const auto oracle = run_oracle(cfg);
    std::optional<std::size_t> idx;
    for (std::size_t k = 0; k < oracle.eigenvalues.size(); ++k) {
        if (oracle.labels[k].first != cfg.state_m ||
            oracle.labels[k].second != cfg.state_n)
            continue;
        if (!idx || std::abs(oracle.eigenvalues[k] - entry.energy) <
                        std::abs(oracle.eigenvalues[*idx] - entry.energy))
            idx = k;
    }
    std::vector<double> psi_o;
    if (idx) {
        psi_o = oracle::restrict_to_arc(oracle, *idx, arc, prob.grid);
        // least-squares amplitude over the inter-vertex segment puts the
        // reference profile on the caustic solution's scale
        double num = 0.0, den = 0.0;
        for (std::size_t i = prob.i_dom_lo; i <= prob.i_dom_hi; ++i) {
            num += psi_o[i] * sol.psi[i];
            den += psi_o[i] * psi_o[i];
        }
        const double a = den > 0.0 ? num / den : 1.0;
        for (double& v : psi_o) v *= a;
    }

    const std::string name = "arc" + std::to_string(cfg.arc_k) + ".csv";
    io::write_arc_csv((dir / name).string(), prob, sol,
                      idx ? &psi_o : nullptr);
    return 0;
}

int cmd_action_surface(const io::RunConfig& cfg) {
    require_state(cfg);
    if (cfg.model.lambda != 0.0)
        throw io::ConfigError(
            "config: action-surface supports only lambda = 0 (the coupled "
            "interior action is out of scope)");
    if (cfg.surface_grid < 2)
        throw io::ConfigError("config: surface_grid must be at least 2");
    const fs::path dir = prepare_out_dir(cfg);

    const auto surf = oracle::separable_action_surface(
        cfg.model, cfg.state_m, cfg.state_n, cfg.surface_grid,
        cfg.surface_grid, cfg.pipeline.n_grid);

    io::write_surface_csv((dir / "action_quantum.csv").string(), surf.xs,
                          surf.ys, surf.X);
    io::write_surface_csv((dir / "action_classical.csv").string(), surf.xs,
                          surf.ys, surf.Wc);
    return 0;
}

int cmd_oracle(const io::RunConfig& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const auto oracle = run_oracle(cfg);
    io::write_file((dir / "oracle.json").string(), io::oracle_to_json(oracle));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Caustic-based semiclassical quantization of a coupled "
                 "two-dimensional well"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    double energy = 0.0, e_max = 0.0, hbar = 0.0;
    std::vector<int> state;
    int arc_k = 0, grid = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--hbar", hbar, "Planck constant override");
    };
    CLI::App* c_trace = app.add_subcommand(
        "trace", "One orbit, its caustic point cloud and the fitted caustic");
    add_common(c_trace);
    c_trace->add_option("--energy", energy, "family energy");

    CLI::App* c_spec = app.add_subcommand(
        "spectrum", "Quantized spectrum up to --e-max, with oracle comparison");
    add_common(c_spec);
    c_spec->add_option("--e-max", e_max, "upper energy bound");

    CLI::App* c_arc = app.add_subcommand(
        "arc", "One-dimensional solution bundle on a converged state's arc");
    add_common(c_arc);
    c_arc->add_option("--state", state, "target state M,N")
        ->delimiter(',')
        ->expected(2);
    c_arc->add_option("--arc", arc_k, "arc index 1..4");

    CLI::App* c_surf = app.add_subcommand(
        "action-surface",
        "Separable quantum/classical action sheets over the caustic rectangle");
    add_common(c_surf);
    c_surf->add_option("--state", state, "target state M,N")
        ->delimiter(',')
        ->expected(2);
    c_surf->add_option("--grid", grid, "surface nodes per axis");

    CLI::App* c_orc =
        app.add_subcommand("oracle", "Matrix diagonalization reference only");
    add_common(c_orc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        io::RunConfig cfg;
        if (!config_path.empty()) cfg = io::load_config(config_path, cfg);
        CLI::App* cmd = app.get_subcommands().front();
        auto passed = [&](const char* name) {
            const CLI::Option* o = cmd->get_option_no_throw(name);
            return o != nullptr && o->count() > 0;
        };
        if (passed("--out")) cfg.out_dir = out_dir;
        if (passed("--hbar")) cfg.model.hbar = hbar;
        if (passed("--energy")) cfg.energy = energy;
        if (passed("--e-max")) cfg.e_max = e_max;
        if (passed("--state")) {
            cfg.state_m = state[0];
            cfg.state_n = state[1];
        }
        if (passed("--arc")) cfg.arc_k = arc_k;
        if (passed("--grid")) cfg.surface_grid = grid;
        cfg = validated_model(cfg);

        if (cmd == c_trace) return cmd_trace(cfg);
        if (cmd == c_spec) return cmd_spectrum(cfg);
        if (cmd == c_arc) return cmd_arc(cfg);
        if (cmd == c_surf) return cmd_action_surface(cfg);
        return cmd_oracle(cfg);
    } catch (const io::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const eigensolver::SearchError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        if (!e.trace.empty()) std::fprintf(stderr, "%s", e.trace.c_str());
        return 3;
    } catch (const eigensolver::InconsistentFamilyError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 4;
    }
}
