#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pitdyn/nn.hpp"
#include "pitdyn/state_gmm.hpp"
#include "pitdyn/vehicle.hpp"

namespace pitdyn::ap {

/// Adaptive-training constants.
struct AdaptiveSchedule {
    double lambda_min = 0.1;
    double lambda_max = 10.0;
    double t0 = 300.0;         // epochs
    double tau = 100.0;        // epochs
    double h_bandwidth = 0.1;
    double lambda_boundary = 1.0;
    Eigen::Vector4d sigma_bound{5.0, 3.0, 1.0, 0.8};
    double tau_consistency = 2.0;

    void validate() const;
};

struct ApinnConfig {
    int J = 3;                 // state-mixture components
    int hidden = 48;
    int pe_dim = 8;
    double step_dt = 0.01;     // prediction step [s]
    int epochs_pretrain = 60;
    int epochs_finetune = 80;
    double lr = 1e-3;
    int window = 8;            // consecutive samples per optimizer step
    int windows_per_traj = 4;
    uint64_t seed = 1;
    AdaptiveSchedule schedule;
    Eigen::Vector4d bounds{60.0, 30.0, 6.0, 4.0}; // soft state bounds b_i
    double lambda_traj = 1.0;
    double lambda_smooth = 0.1;
    double lambda_phys_gmm = 1.0;
    double lambda_consistency = 0.1;
    double lambda_nll = 0.1;   // NLL share inside the data loss
    double freeze_ratio = 0.6;
    bool physics_enabled = true;   // nn-only baseline sets false
    bool center_on_prior = true;   // nn-only baseline sets false
    double sigma_min_sq = 1e-4;

    void validate() const;
};

/// One labeled trajectory with its driving force curve.
struct TrajectorySample {
    Trajectory traj; // 100 Hz
    ForceCurve force;
    ForceApplication app;
    VehicleParams params;
    std::string id;
};
using TrajectoryDataset = std::vector<TrajectorySample>;

// --- adaptive-weighting primitives ---

/// lambda_min + (lambda_max - lambda_min) * sigmoid((epoch - t0)/tau) * dq.
double adaptive_weight(double epoch, const AdaptiveSchedule& schedule, double data_quality);

/// exp(-d_nearest / h) in the normalized (t, |F|) feature plane; throws
/// EmptyTrainingSet.
double data_quality(const Eigen::Vector2d& feature,
                    const std::vector<Eigen::Vector2d>& training_features,
                    double h_bandwidth);

/// lambda_boundary * sum_i softplus((|x_i| - b_i)/s_i)^2.
double soft_boundary_loss(const Eigen::Vector4d& prediction, const Eigen::Vector4d& bounds,
                          const Eigen::Vector4d& scales, double lambda_boundary);

/// L_data / (L_data + L_physics); both-zero degenerates to 0.5.
double balance_ratio(double l_data, double l_physics);

/// lambda * max(0.1, ratio), floored at 0.01 absolute.
double auto_adjust(double lambda_physics, double ratio);

/// Central-difference residual of the 4DOF equations along a 100 Hz state
/// sequence under the given ground-frame force curve.
double physics_residual_loss(const std::vector<VehicleState>& states, double dt,
                             const ForceCurve& force, const ForceApplication& app,
                             const VehicleParams& params, double lambda_physics);

/// exp(-|mu_j - mu_k|^2 / (2 tau^2)) summed over unordered pairs.
double consistency_loss(const StateGmm& gmm, double tau_consistency);

/// One 10 ms 4DOF step under a constant ground-frame force (the GMM prior).
Eigen::Vector4d prior_step(const VehicleState& state, const VehicleParams& params,
                           const Eigen::Vector2d& force_ground, const ForceApplication& app,
                           double dt);

struct RolloutResult {
    Trajectory traj;
    std::vector<StateGmm> gmms; // per output step
};

struct ApinnTrainResult;

class ApinnModel {
  public:
    ApinnModel() = default;
    ApinnModel(const ApinnConfig& config, std::mt19937_64& rng);

    StateGmm predict_next(const VehicleState& state, const Eigen::Vector2d& force_ground,
                          const ForceApplication& app, const VehicleParams& params,
                          double t) const;

    /// Compose predict_next steps; pose integrates kinematically from the
    /// mixture mean. A coast-down guard caps ground speed when the applied
    /// force is negligible.
    RolloutResult rollout(const VehicleState& initial, const ForceCurve& force,
                          const ForceApplication& app, const VehicleParams& params,
                          double horizon) const;

    const ApinnConfig& config() const { return config_; }
    nn::Model& net() { return net_; }
    const nn::Model& net() const { return net_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

    /// Learnable soft-boundary scales s_i (positive).
    Eigen::Vector4d boundary_scales() const;

    void save(const std::string& path) const;
    static ApinnModel load(const std::string& path);

  private:
    friend ApinnTrainResult train_apinn(const TrajectoryDataset& pretrain,
                                        const TrajectoryDataset& finetune,
                                        const ApinnConfig& config);
    ApinnConfig config_;
    nn::Model net_;
    bool trained_ = false;
    uint64_t seed_ = 0;
};

struct ApinnHistoryRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double physics_loss = 0.0;
    double balance = 0.0;
    double lambda_physics = 0.0;
};

struct ApinnTrainResult {
    ApinnModel model;
    std::vector<ApinnHistoryRow> history;
    int frozen_layers = 0;
    uint64_t physics_evals = 0; // assert hook for the physics-free baseline
};

/// Phase 1 on the 4DOF pretrain set, phase 2 with the 60% layer-freeze rule
/// on the fine-tune set (skipped when empty). Throws Diverged on NaN loss.
ApinnTrainResult train_apinn(const TrajectoryDataset& pretrain,
                             const TrajectoryDataset& finetune, const ApinnConfig& config);

/// Mean one-step physics residual of the model's mixture mean over a dataset.
double eval_physics_residual(const ApinnModel& model, const TrajectoryDataset& dataset,
                             int max_samples = 2000);

} // namespace pitdyn::ap
