#include "caustiq/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace caustiq::io {
namespace {

using nlohmann::json;

double as_double(const json& j, const std::string& where) {
    if (!j.is_number())
        throw ConfigError("config: " + where + " must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
    if (!j.is_number_integer())
        throw ConfigError("config: " + where + " must be an integer");
    return j.get<int>();
}

void read_model(const json& j, model::HamiltonianModel& m) {
    for (const auto& [key, val] : j.items()) {
        if (key == "mass") m.mass = as_double(val, "model.mass");
        else if (key == "hbar") m.hbar = as_double(val, "model.hbar");
        else if (key == "omega_x") m.omega_x = as_double(val, "model.omega_x");
        else if (key == "omega_y") m.omega_y = as_double(val, "model.omega_y");
        else if (key == "lambda") m.lambda = as_double(val, "model.lambda");
        else throw ConfigError("config: unknown key model." + key);
    }
}

void read_build(const json& j, caustic::BuildOptions& b) {
    for (const auto& [key, val] : j.items()) {
        if (key == "step") b.step = as_double(val, "build.step");
        else if (key == "t_max") b.t_max = as_double(val, "build.t_max");
        else if (key == "escape_radius")
            b.escape_radius = as_double(val, "build.escape_radius");
        else if (key == "fit_degree")
            b.fit_degree = as_int(val, "build.fit_degree");
        else if (key == "fit_residual_tol")
            b.fit_residual_tol = as_double(val, "build.fit_residual_tol");
        else if (key == "kappa_target")
            b.kappa_target = as_double(val, "build.kappa_target");
        else if (key == "extension_cap")
            b.extension_cap = as_double(val, "build.extension_cap");
        else throw ConfigError("config: unknown key build." + key);
    }
}

void read_pipeline(const json& j, eigensolver::PipelineOptions& p) {
    for (const auto& [key, val] : j.items()) {
        if (key == "n_grid") p.n_grid = as_int(val, "pipeline.n_grid");
        else if (key == "defect_tol")
            p.defect_tol = as_double(val, "pipeline.defect_tol");
        else if (key == "consistency_tol")
            p.consistency_tol = as_double(val, "pipeline.consistency_tol");
        else if (key == "max_iter")
            p.max_iter = as_int(val, "pipeline.max_iter");
        else if (key == "max_step_e")
            p.max_step_e = as_double(val, "pipeline.max_step_e");
        else if (key == "max_step_s")
            p.max_step_s = as_double(val, "pipeline.max_step_s");
        else if (key == "fd_step")
            p.fd_step = as_double(val, "pipeline.fd_step");
        else if (key == "e_max_guard")
            p.e_max_guard = as_double(val, "pipeline.e_max_guard");
        else throw ConfigError("config: unknown key pipeline." + key);
    }
}

json model_json(const model::HamiltonianModel& m) {
    return {{"mass", m.mass},
            {"hbar", m.hbar},
            {"omega_x", m.omega_x},
            {"omega_y", m.omega_y},
            {"lambda", m.lambda}};
}

json config_json(const RunConfig& cfg) {
    const auto& b = cfg.pipeline.build;
    const auto& p = cfg.pipeline;
    json j;
    j["model"] = model_json(cfg.model);
    j["build"] = {{"step", b.step},
                  {"t_max", b.t_max},
                  {"escape_radius", b.escape_radius},
                  {"fit_degree", b.fit_degree},
                  {"fit_residual_tol", b.fit_residual_tol},
                  {"kappa_target", b.kappa_target},
                  {"extension_cap", b.extension_cap}};
    j["pipeline"] = {{"n_grid", p.n_grid},
                     {"defect_tol", p.defect_tol},
                     {"consistency_tol", p.consistency_tol},
                     {"max_iter", p.max_iter},
                     {"max_step_e", p.max_step_e},
                     {"max_step_s", p.max_step_s},
                     {"fd_step", p.fd_step},
                     {"e_max_guard", p.e_max_guard}};
    j["oracle_n_max"] = cfg.oracle_n_max;
    j["surface_grid"] = cfg.surface_grid;
    j["energy"] = cfg.energy;
    j["e_max"] = cfg.e_max;
    j["start_angle"] = cfg.start_angle;
    j["state"] = {cfg.state_m, cfg.state_n};
    j["arc"] = cfg.arc_k;
    j["out_dir"] = cfg.out_dir;
    return j;
}

const char* axis_name(caustic::Axis a) {
    return a == caustic::Axis::y_of_x ? "y_of_x" : "x_of_y";
}

caustic::Axis axis_from_name(const std::string& s) {
    if (s == "y_of_x") return caustic::Axis::y_of_x;
    if (s == "x_of_y") return caustic::Axis::x_of_y;
    throw std::runtime_error("caustic json: unknown axis '" + s + "'");
}

json caustic_json(const caustic::Caustic& c) {
    json j;
    j["energy"] = c.energy;
    j["clockwise"] = c.clockwise;
    j["vertices"] = json::array();
    for (const auto& v : c.vertices)
        j["vertices"].push_back({{"index", v.index},
                                 {"position", {v.position.x, v.position.y}},
                                 {"residual", v.residual}});
    j["arcs"] = json::array();
    for (const auto& a : c.arcs)
        j["arcs"].push_back({{"index", a.index},
                             {"axis", axis_name(a.axis)},
                             {"degree", static_cast<int>(a.coefficients.size()) - 1},
                             {"coefficients", a.coefficients},
                             {"center", a.center},
                             {"scale", a.scale},
                             {"dom_lo", a.dom_lo},
                             {"dom_hi", a.dom_hi},
                             {"ext_lo", a.ext_lo},
                             {"ext_hi", a.ext_hi},
                             {"fit_residual", a.fit_residual},
                             {"energy", a.energy}});
    return j;
}

caustic::Caustic caustic_from(const json& j) {
    caustic::Caustic c;
    c.energy = j.at("energy").get<double>();
    c.clockwise = j.at("clockwise").get<bool>();
    const auto& jv = j.at("vertices");
    const auto& ja = j.at("arcs");
    if (jv.size() != 4 || ja.size() != 4)
        throw std::runtime_error("caustic json: need exactly 4 vertices and 4 arcs");
    for (int k = 0; k < 4; ++k) {
        const auto& v = jv[k];
        c.vertices[k].index = v.at("index").get<int>();
        c.vertices[k].position = {v.at("position")[0].get<double>(),
                                  v.at("position")[1].get<double>()};
        c.vertices[k].residual = v.at("residual").get<double>();
        const auto& a = ja[k];
        auto& arc = c.arcs[k];
        arc.index = a.at("index").get<int>();
        arc.axis = axis_from_name(a.at("axis").get<std::string>());
        arc.coefficients = a.at("coefficients").get<std::vector<double>>();
        arc.center = a.at("center").get<double>();
        arc.scale = a.at("scale").get<double>();
        arc.dom_lo = a.at("dom_lo").get<double>();
        arc.dom_hi = a.at("dom_hi").get<double>();
        arc.ext_lo = a.at("ext_lo").get<double>();
        arc.ext_hi = a.at("ext_hi").get<double>();
        arc.fit_residual = a.at("fit_residual").get<double>();
        arc.energy = a.at("energy").get<double>();
    }
    return c;
}

/// Oracle eigenvalue for the entry's (m,n) label, nearest in energy.
std::optional<double> oracle_match(const oracle::OracleResult& r, int m, int n,
                                   double energy) {
    std::optional<double> best;
    for (std::size_t k = 0; k < r.eigenvalues.size(); ++k) {
        if (r.labels[k].first != m || r.labels[k].second != n) continue;
        if (!best || std::abs(r.eigenvalues[k] - energy) <
                         std::abs(*best - energy))
            best = r.eigenvalues[k];
    }
    return best;
}

}  // namespace

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [key, val] : j.items()) {
        if (key == "model") read_model(val, base.model);
        else if (key == "build") read_build(val, base.pipeline.build);
        else if (key == "pipeline") read_pipeline(val, base.pipeline);
        else if (key == "oracle_n_max")
            base.oracle_n_max = as_int(val, "oracle_n_max");
        else if (key == "surface_grid")
            base.surface_grid = as_int(val, "surface_grid");
        else if (key == "energy") base.energy = as_double(val, "energy");
        else if (key == "e_max") base.e_max = as_double(val, "e_max");
        else if (key == "start_angle")
            base.start_angle = as_double(val, "start_angle");
        else if (key == "state") {
            if (!val.is_array() || val.size() != 2)
                throw ConfigError("config: state must be [m, n]");
            base.state_m = as_int(val[0], "state[0]");
            base.state_n = as_int(val[1], "state[1]");
        } else if (key == "arc") base.arc_k = as_int(val, "arc");
        else if (key == "out_dir") {
            if (!val.is_string())
                throw ConfigError("config: out_dir must be a string");
            base.out_dir = val.get<std::string>();
        } else throw ConfigError("config: unknown key " + key);
    }
    return base;
}

std::string config_to_json(const RunConfig& cfg) {
    return config_json(cfg).dump(2) + "\n";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void write_trajectory_csv(const std::string& path,
                          const classical::Trajectory& traj) {
    std::string s = "t,x,y,px,py\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& st = traj.states[i];
        s += fmt(traj.times[i]) + "," + fmt(st.q.x) + "," + fmt(st.q.y) + "," +
             fmt(st.p.x) + "," + fmt(st.p.y) + "\n";
    }
    write_file(path, s);
}

void write_cloud_csv(const std::string& path,
                     const classical::CausticPointCloud& cloud) {
    std::string s = "x,y\n";
    for (const auto& cp : cloud.points)
        s += fmt(cp.position.x) + "," + fmt(cp.position.y) + "\n";
    write_file(path, s);
}

void write_arc_csv(const std::string& path, const arc1d::ArcProblem& prob,
                   const arc1d::ArcSolution& sol,
                   const std::vector<double>* psi_oracle) {
    const std::size_t n = prob.grid.size();
    auto col = [&](const std::vector<double>& v, std::size_t i) {
        return v.size() == n ? fmt(v[i]) : std::string{};
    };
    std::string s = "parameter,psi,X,Y,u_k,g";
    if (psi_oracle) s += ",psi_oracle";
    s += "\n";
    for (std::size_t i = 0; i < n; ++i) {
        s += fmt(prob.grid[i]) + "," + col(sol.psi, i) + "," + col(sol.X, i) +
             "," + col(sol.Y, i) + "," + fmt(prob.u_k[i]) + "," +
             fmt(prob.g[i]);
        if (psi_oracle) s += "," + col(*psi_oracle, i);
        s += "\n";
    }
    write_file(path, s);
}

void write_surface_csv(const std::string& path, const std::vector<double>& xs,
                       const std::vector<double>& ys,
                       const std::vector<double>& values,
                       const std::vector<bool>* present) {
    std::string s = "x,y,value\n";
    for (std::size_t iy = 0; iy < ys.size(); ++iy)
        for (std::size_t ix = 0; ix < xs.size(); ++ix) {
            const std::size_t i = iy * xs.size() + ix;
            s += fmt(xs[ix]) + "," + fmt(ys[iy]) + ",";
            if (!present || (*present)[i]) s += fmt(values[i]);
            s += "\n";
        }
    write_file(path, s);
}

void write_comparison_csv(const std::string& path,
                          const eigensolver::ScanReport& report,
                          const oracle::OracleResult* oracle) {
    std::string s = "E,m,n,E_oracle,abs_dE\n";
    for (const auto& e : report.entries) {
        s += fmt(e.energy) + "," + std::to_string(e.m) + "," +
             std::to_string(e.n) + ",";
        std::optional<double> ref;
        if (oracle) ref = oracle_match(*oracle, e.m, e.n, e.energy);
        if (ref) s += fmt(*ref) + "," + fmt(std::abs(e.energy - *ref));
        else s += ",";
        s += "\n";
    }
    write_file(path, s);
}

std::string caustic_to_json(const caustic::Caustic& c) {
    return caustic_json(c).dump(2) + "\n";
}

caustic::Caustic parse_caustic(const std::string& text) {
    return caustic_from(json::parse(text));
}

std::string spectrum_to_json(const eigensolver::ScanReport& report,
                             const RunConfig& cfg,
                             const oracle::OracleResult* oracle) {
    json j;
    j["config"] = config_json(cfg);
    j["entries"] = json::array();
    for (const auto& e : report.entries) {
        json je = {{"energy", e.energy},
                   {"m", e.m},
                   {"n", e.n},
                   {"vertex_s", e.vertex_s},
                   {"defects", e.defects},
                   {"ebk_residuals", e.ebk_residuals},
                   {"caustic", caustic_json(e.caustic)}};
        if (oracle) {
            const auto ref = oracle_match(*oracle, e.m, e.n, e.energy);
            if (ref) {
                je["e_oracle"] = *ref;
                je["abs_de"] = std::abs(e.energy - *ref);
            }
        }
        j["entries"].push_back(std::move(je));
    }
    j["failures"] = json::array();
    for (const auto& f : report.failures)
        j["failures"].push_back({{"m", f.m},
                                 {"n", f.n},
                                 {"e_seed", f.e_seed},
                                 {"message", f.message}});
    return j.dump(2) + "\n";
}

std::string oracle_to_json(const oracle::OracleResult& r) {
    json j;
    j["n_max"] = r.spec.n_max;
    j["omega_x"] = r.spec.omega_x;
    j["omega_y"] = r.spec.omega_y;
    j["mass"] = r.spec.mass;
    j["hbar"] = r.spec.hbar;
    j["eigenvalues"] = r.eigenvalues;
    j["labels"] = json::array();
    for (const auto& [i, k] : r.labels) j["labels"].push_back({i, k});
    return j.dump(2) + "\n";
}

}  // namespace caustiq::io
