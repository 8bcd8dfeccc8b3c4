#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pitdyn/impulse.hpp"
#include "pitdyn/vehicle.hpp"

namespace pitdyn::io {

/// Shortest round-trip decimal formatting (%.17g trimmed); all numeric
/// artifacts go through this so reruns are byte-identical.
std::string format_double(double v);

uint64_t fnv1a(const std::string& data);

// --- JSON ---
std::string scenario_to_json(const CollisionScenario& s);
CollisionScenario scenario_from_json(const std::string& text);
std::string params_to_json(const VehicleParams& p);
VehicleParams params_from_json(const std::string& text);
std::string solution_to_json(const ImpulseSolution& sol);

/// Scenario document: collision sub-object plus optional vehicle overrides.
struct ScenarioDoc {
    CollisionScenario collision;
    VehicleParams vehicle;
    ForceApplication application;
    double horizon = 5.0;
};
std::string scenario_doc_to_json(const ScenarioDoc& doc);
ScenarioDoc scenario_doc_from_json(const std::string& text);

// --- CSV ---
/// `t,X,Y,psi,vx,vy,yaw_rate,roll,roll_rate,ax,ay` at the trajectory rate.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

/// `t,Fx,Fy` on the curve's uniform grid.
void write_force_csv(const std::string& path, const ForceCurve& curve);
ForceCurve read_force_csv(const std::string& path);

/// Generic table writer with deterministic formatting.
void write_table_csv(const std::string& path, const std::string& header,
                     const std::vector<std::vector<double>>& rows);

std::string read_file(const std::string& path); // throws ConfigError if missing
void write_file(const std::string& path, const std::string& content);

} // namespace pitdyn::io
