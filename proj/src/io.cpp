#include "pitdyn/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pitdyn/errors.hpp"

namespace pitdyn::io {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char s[32];
        std::snprintf(s, sizeof(s), "%.*g", prec, v);
        double back;
        std::sscanf(s, "%lf", &back);
        if (back == v) return s;
    }
    return buf;
}

uint64_t fnv1a(const std::string& data) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << content;
}

namespace {

json parse(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid JSON document");
    return j;
}

double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(std::string("field not numeric: ") + key);
    return j[key].get<double>();
}

} // namespace

std::string scenario_to_json(const CollisionScenario& s) {
    json j;
    j["m_t"] = s.m_t;
    j["m_b"] = s.m_b;
    j["I_zzt"] = s.I_zzt;
    j["I_zzb"] = s.I_zzb;
    j["v_tx"] = s.v_tx;
    j["v_ty"] = s.v_ty;
    j["psi_dot_t"] = s.psi_dot_t;
    j["v_bx"] = s.v_bx;
    j["v_by"] = s.v_by;
    j["psi_dot_b"] = s.psi_dot_b;
    j["d_t"] = s.d_t;
    j["d_b"] = s.d_b;
    j["theta_t"] = s.theta_t;
    j["theta_b"] = s.theta_b;
    j["xi_t"] = s.xi_t;
    j["xi_b"] = s.xi_b;
    j["Gamma"] = s.Gamma;
    j["e"] = s.e;
    j["mu"] = s.mu;
    return j.dump(2);
}

CollisionScenario scenario_from_json(const std::string& text) {
    const json j = parse(text);
    CollisionScenario d;
    CollisionScenario s;
    s.m_t = get_num(j, "m_t", d.m_t);
    s.m_b = get_num(j, "m_b", d.m_b);
    s.I_zzt = get_num(j, "I_zzt", d.I_zzt);
    s.I_zzb = get_num(j, "I_zzb", d.I_zzb);
    s.v_tx = get_num(j, "v_tx", d.v_tx);
    s.v_ty = get_num(j, "v_ty", d.v_ty);
    s.psi_dot_t = get_num(j, "psi_dot_t", d.psi_dot_t);
    s.v_bx = get_num(j, "v_bx", d.v_bx);
    s.v_by = get_num(j, "v_by", d.v_by);
    s.psi_dot_b = get_num(j, "psi_dot_b", d.psi_dot_b);
    s.d_t = get_num(j, "d_t", d.d_t);
    s.d_b = get_num(j, "d_b", d.d_b);
    s.theta_t = get_num(j, "theta_t", d.theta_t);
    s.theta_b = get_num(j, "theta_b", d.theta_b);
    s.xi_t = get_num(j, "xi_t", d.xi_t);
    s.xi_b = get_num(j, "xi_b", d.xi_b);
    s.Gamma = get_num(j, "Gamma", d.Gamma);
    s.e = get_num(j, "e", d.e);
    s.mu = get_num(j, "mu", d.mu);
    s.validate();
    return s;
}

std::string params_to_json(const VehicleParams& p) {
    json j;
    j["m"] = p.m;
    j["m_s"] = p.m_s;
    j["I_zz"] = p.I_zz;
    j["I_xx_s"] = p.I_xx_s;
    j["I_xz"] = p.I_xz;
    j["K_s"] = p.K_s;
    j["B_s"] = p.B_s;
    j["h_rc"] = p.h_rc;
    j["h_cog"] = p.h_cog;
    j["l_f"] = p.l_f;
    j["l_r"] = p.l_r;
    j["t_w"] = p.t_w;
    j["K_f"] = p.K_f;
    j["K_r"] = p.K_r;
    j["C"] = {p.C[0], p.C[1], p.C[2], p.C[3]};
    j["mu_s"] = p.mu_s;
    j["f_r0"] = p.f_r0;
    j["f_r1"] = p.f_r1;
    j["f_r2"] = p.f_r2;
    j["g"] = p.g;
    return j.dump(2);
}

VehicleParams params_from_json(const std::string& text) {
    const json j = parse(text);
    VehicleParams d;
    VehicleParams p;
    p.m = get_num(j, "m", d.m);
    p.m_s = get_num(j, "m_s", d.m_s);
    p.I_zz = get_num(j, "I_zz", d.I_zz);
    p.I_xx_s = get_num(j, "I_xx_s", d.I_xx_s);
    p.I_xz = get_num(j, "I_xz", d.I_xz);
    p.K_s = get_num(j, "K_s", d.K_s);
    p.B_s = get_num(j, "B_s", d.B_s);
    p.h_rc = get_num(j, "h_rc", d.h_rc);
    p.h_cog = get_num(j, "h_cog", d.h_cog);
    p.l_f = get_num(j, "l_f", d.l_f);
    p.l_r = get_num(j, "l_r", d.l_r);
    p.t_w = get_num(j, "t_w", d.t_w);
    p.K_f = get_num(j, "K_f", d.K_f);
    p.K_r = get_num(j, "K_r", d.K_r);
    if (j.contains("C")) {
        if (!j["C"].is_array() || j["C"].size() != 4)
            throw ConfigError("C must be a 4-element array");
        for (int i = 0; i < 4; ++i) p.C[i] = j["C"][i].get<double>();
    }
    p.mu_s = get_num(j, "mu_s", d.mu_s);
    p.f_r0 = get_num(j, "f_r0", d.f_r0);
    p.f_r1 = get_num(j, "f_r1", d.f_r1);
    p.f_r2 = get_num(j, "f_r2", d.f_r2);
    p.g = get_num(j, "g", d.g);
    p.validate();
    return p;
}

std::string solution_to_json(const ImpulseSolution& sol) {
    json j;
    j["P_x"] = sol.P_x;
    j["P_y"] = sol.P_y;
    j["V_tx"] = sol.V_tx;
    j["V_ty"] = sol.V_ty;
    j["Psi_dot_t"] = sol.Psi_dot_t;
    j["V_bx"] = sol.V_bx;
    j["V_by"] = sol.V_by;
    j["Psi_dot_b"] = sol.Psi_dot_b;
    j["m_eff"] = sol.m_eff;
    j["E_dissipated"] = sol.E_dissipated;
    return j.dump(2);
}

std::string scenario_doc_to_json(const ScenarioDoc& doc) {
    json j;
    j["collision"] = json::parse(scenario_to_json(doc.collision));
    j["vehicle"] = json::parse(params_to_json(doc.vehicle));
    j["application"] = {{"x", doc.application.x}, {"y", doc.application.y},
                        {"z", doc.application.z}};
    j["horizon"] = doc.horizon;
    return j.dump(2);
}

ScenarioDoc scenario_doc_from_json(const std::string& text) {
    const json j = parse(text);
    ScenarioDoc doc;
    if (j.contains("collision")) doc.collision = scenario_from_json(j["collision"].dump());
    if (j.contains("vehicle")) doc.vehicle = params_from_json(j["vehicle"].dump());
    if (j.contains("application")) {
        const json& a = j["application"];
        doc.application.x = get_num(a, "x", 0.0);
        doc.application.y = get_num(a, "y", 0.0);
        doc.application.z = get_num(a, "z", 0.0);
    }
    doc.horizon = get_num(j, "horizon", doc.horizon);
    if (doc.horizon <= 0.0) throw ConfigError("horizon must be positive");
    return doc;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ostringstream out;
    out << "t,X,Y,psi,vx,vy,yaw_rate,roll,roll_rate,ax,ay\n";
    for (size_t i = 0; i < traj.t.size(); ++i) {
        const VehicleState& s = traj.states[i];
        out << format_double(traj.t[i]) << ',' << format_double(s.X) << ','
            << format_double(s.Y) << ',' << format_double(s.psi) << ','
            << format_double(s.v_x) << ',' << format_double(s.v_y) << ','
            << format_double(s.psi_dot) << ',' << format_double(s.phi) << ','
            << format_double(s.phi_dot) << ',' << format_double(s.a_x) << ','
            << format_double(s.a_y) << '\n';
    }
    write_file(path, out.str());
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::string& path, int cols,
                                               const std::string& want_header) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != want_header)
        throw ConfigError(path + ": unexpected CSV header");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) != cols)
            throw ConfigError(path + ": wrong CSV column count");
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

Trajectory read_trajectory_csv(const std::string& path) {
    const auto rows = read_csv_rows(path, 11, "t,X,Y,psi,vx,vy,yaw_rate,roll,roll_rate,ax,ay");
    Trajectory traj;
    for (const auto& r : rows) {
        traj.t.push_back(r[0]);
        VehicleState s;
        s.X = r[1];
        s.Y = r[2];
        s.psi = r[3];
        s.v_x = r[4];
        s.v_y = r[5];
        s.psi_dot = r[6];
        s.phi = r[7];
        s.phi_dot = r[8];
        s.a_x = r[9];
        s.a_y = r[10];
        traj.states.push_back(s);
    }
    return traj;
}

void write_force_csv(const std::string& path, const ForceCurve& curve) {
    std::ostringstream out;
    out << "t,Fx,Fy\n";
    for (int i = 0; i < curve.size(); ++i) {
        const double t = curve.t_start + i * curve.dt;
        out << format_double(t) << ',' << format_double(curve.samples[i](0)) << ','
            << format_double(curve.samples[i](1)) << '\n';
    }
    write_file(path, out.str());
}

ForceCurve read_force_csv(const std::string& path) {
    const auto rows = read_csv_rows(path, 3, "t,Fx,Fy");
    ForceCurve c;
    if (rows.empty()) return c;
    c.t_start = rows.front()[0];
    c.t_end = rows.back()[0];
    c.dt = rows.size() > 1 ? rows[1][0] - rows[0][0] : 1e-3;
    for (const auto& r : rows) c.samples.push_back({r[1], r[2]});
    return c;
}

void write_table_csv(const std::string& path, const std::string& header,
                     const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    out << header << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    write_file(path, out.str());
}

} // namespace pitdyn::io
