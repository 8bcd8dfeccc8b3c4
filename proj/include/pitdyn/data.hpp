#pragma once

#include <string>
#include <vector>

#include "pitdyn/apinn.hpp"
#include "pitdyn/force_model.hpp"

namespace pitdyn::data {

struct SurrogateConfig {
    int scenarios = 100;
    double target_mass = 2000.0;
    std::vector<double> bullet_masses = {1500.0, 2000.0, 2500.0};
    double speed_min = 5.0, speed_max = 15.0;   // bullet approach speed [m/s]
    double target_speed_max = 10.0;             // target forward speed [m/s]
    double angle_min = -0.6, angle_max = 0.6;   // contact-surface angle range [rad]
    double pulse_min = 0.05, pulse_max = 0.15;  // pulse duration [s]
    double noise_scale = 0.10;                  // multiplicative band-limited noise
    double e = 0.5;
    double mu_max = 0.3;
    uint64_t seed = 1;
    double grid_dt = 1e-3;

    void validate() const;
};

/// Half-sine pulses scaled to the closed-form impulse, noised, then
/// re-projected so the integral constraint holds exactly.
fm::ForceDataset generate_force_dataset(const SurrogateConfig& config);

/// Additive re-projection of a curve onto the impulse constraint along a
/// normalized half-sine profile; idempotent for feasible curves.
ForceCurve project_to_impulse(const ForceCurve& curve, const Eigen::Vector2d& target);

/// 4DOF rollouts at 100 Hz over `horizon` seconds, one per force sample.
ap::TrajectoryDataset generate_pretrain_trajectories(const fm::ForceDataset& dataset,
                                                     const VehicleParams& params,
                                                     double horizon = 5.0);

/// "True plant" stand-in: perturbed tire parameters (C x c_scale,
/// mu_s x mu_scale) plus a first-order tire relaxation lag on the lateral
/// forces.
struct PlantConfig {
    double c_scale = 0.8;
    double mu_scale = 0.85;
    double lag_tau = 0.05; // relaxation time constant [s]
};
VehicleParams perturbed_params(const VehicleParams& base, const PlantConfig& plant);
Trajectory simulate_plant(const VehicleState& initial, const VehicleParams& base,
                          const PlantConfig& plant, const ForceCurve& force,
                          const ForceApplication& app, double horizon);
ap::TrajectoryDataset generate_plant_trajectories(const fm::ForceDataset& dataset,
                                                  const VehicleParams& params,
                                                  const PlantConfig& plant,
                                                  double horizon = 5.0);

// --- PSO tire fitting ---
struct PsoConfig {
    int swarm = 40;
    int iterations = 200;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    uint64_t seed = 1;
};
struct PsoResult {
    double C = 0.0;           // common tire shape factor
    double mu_s = 0.0;        // friction coefficient
    std::vector<double> convergence; // global-best objective per iteration
    double objective = 0.0;
};
/// Global-best PSO over (C, mu_s) minimizing trajectory RMSE of the 4DOF
/// model against the given trajectories.
PsoResult pso_fit_tires(const ap::TrajectoryDataset& trajectories,
                        const VehicleParams& base_params, const PsoConfig& config = {});

// --- impulse clustering ---
struct ClusterReport {
    int k = 0;
    std::vector<double> silhouette_per_k; // indexed k-2
    std::vector<int> membership;
    std::vector<Eigen::Vector4d> centroids; // standardized feature space
    std::vector<std::vector<double>> feature_table; // per case: Ifx, Ify, Itot, maxF, meanF, stdF
    std::vector<std::string> merge_log;
};
/// Features [I_fx, I_fy, I_total, max|F|] standardized; k scanned 2..8 with
/// silhouette selection (20 inits, 500 iterations); clusters <= 5% merged.
ClusterReport cluster_by_impulse(const fm::ForceDataset& dataset, uint64_t seed = 1);

// --- evaluation ---
struct EvalCase {
    Trajectory truth;
    Trajectory prediction;
};
struct EvalMetrics {
    // RMSE over X, Y, v_x, v_y, yaw rate: mean and std across cases
    Eigen::Matrix<double, 5, 1> rmse_mean, rmse_std;
    double avg_error = 0.0;    // mean Euclidean trajectory error [m]
    double time_per_step_ms = 0.0; // filled by the caller's timing harness
};
EvalMetrics evaluate(const std::vector<EvalCase>& cases);
double trajectory_rmse(const Trajectory& a, const Trajectory& b, int component);
double mean_position_error(const Trajectory& truth, const Trajectory& pred);

/// Physics-free baseline: identical architecture with physics losses and
/// prior centering disabled.
ap::ApinnTrainResult train_nn_only_baseline(const ap::TrajectoryDataset& dataset,
                                            ap::ApinnConfig config);

} // namespace pitdyn::data
