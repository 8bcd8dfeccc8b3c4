#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pitdyn/impulse.hpp"
#include "pitdyn/nn.hpp"

namespace pitdyn::fm {

/// One training case: scenario, its closed-form impulse label, and the
/// observed force curve.
struct ForceSample {
    CollisionScenario scenario;
    ImpulseSolution solution;
    ForceCurve curve;
    std::string id;
};
using ForceDataset = std::vector<ForceSample>;

/// Mixture over planar force at one time sample; diagonal covariances.
struct ForceGmmSlice {
    std::vector<double> weights;
    std::vector<Eigen::Vector2d> means; // [N]
    std::vector<Eigen::Vector2d> vars;  // diagonal [N^2]

    int components() const { return static_cast<int>(weights.size()); }
    Eigen::Vector2d mean() const;
};

struct ForceModelConfig {
    int K = 3;                 // mixture components (1..8)
    double dt_max = 0.2;       // duration cap [s]
    double lambda_imp = 1.0;
    double lambda_eng = 1.0;
    double sigma_min = 0.01;   // in scaled force units
    int hidden = 48;
    int pe_dim = 16;
    int epochs = 500;
    double lr = 1e-3;
    int batch = 32;            // scenarios per optimizer step
    uint64_t seed = 1;
    double grid_dt = 1e-3;     // common training/prediction grid

    void validate() const;
};

/// Internal force scaling: network losses operate on F * kForceScale.
inline constexpr double kForceScale = 1e-4;

struct ForceTrainResult;

class ForceModel {
  public:
    ForceModel() = default;
    ForceModel(const ForceModelConfig& config, std::mt19937_64& rng);

    /// Mixture slice at one time plus the adaptive duration for theta.
    /// Forces are reported unscaled [N]; t past the predicted duration
    /// yields a zero mean (hard window).
    ForceGmmSlice predict(const Eigen::Matrix<double, 7, 1>& theta, double t) const;
    double predict_duration(const Eigen::Matrix<double, 7, 1>& theta) const;

    /// Mixture-mean force on the 1 kHz grid over [0, duration].
    ForceCurve predict_curve(const Eigen::Matrix<double, 7, 1>& theta) const;

    /// Draw n samples from the mixture at time t (diagnostics).
    std::vector<Eigen::Vector2d> sample(const Eigen::Matrix<double, 7, 1>& theta, double t,
                                        int n, std::mt19937_64& rng) const;

    const ForceModelConfig& config() const { return config_; }
    nn::Model& net() { return net_; }
    const nn::Model& net() const { return net_; }
    bool trained() const { return trained_; }

    void save(const std::string& path) const;
    static ForceModel load(const std::string& path);

    // standardization of theta learned from the training set
    Eigen::Matrix<double, 7, 1> feat_mean = Eigen::Matrix<double, 7, 1>::Zero();
    Eigen::Matrix<double, 7, 1> feat_std = Eigen::Matrix<double, 7, 1>::Ones();

  private:
    friend ForceTrainResult train_force_model(const ForceDataset& dataset,
                                              const ForceModelConfig& config);
    ForceModelConfig config_;
    nn::Model net_;
    bool trained_ = false;
    uint64_t seed_ = 0;
};

// --- physics losses (unscaled units; pure functions used by training and
// tests alike) ---

/// lambda_imp * ((int Fx - P_x)^2 + (int Fy - P_y)^2).
double impulse_loss(const ForceCurve& curve, const ImpulseSolution& target, double lambda_imp);

/// lambda_eng * (int F . v_rel dt - E_dissipated)^2 with v_rel sampled on the
/// curve grid; throws GridMismatch when sizes differ.
double energy_loss(const ForceCurve& curve, const std::vector<Eigen::Vector2d>& v_rel,
                   double E_dissipated, double lambda_eng);

/// Mean over samples of -log sum_k pi_k N(F_obs; mu_k, Sigma_k); slices
/// indexed per observation sample.
double nll_loss(const std::vector<Eigen::Vector2d>& observed,
                const std::vector<ForceGmmSlice>& slices);

/// Linearly decaying contact-point relative speed from |v_rel0| down to
/// e*|v_rel0| over the pulse window, directed along the initial relative
/// velocity.
std::vector<Eigen::Vector2d> relative_velocity_profile(const CollisionScenario& scenario,
                                                       int samples);

struct TrainHistory {
    std::vector<double> train_loss, val_loss, physics_loss;
};

struct ForceTrainResult {
    ForceModel model;
    TrainHistory history;
    std::vector<int> train_indices, val_indices;
};

/// 3:1 train/validation split stratified by bullet mass; minimizes
/// NLL + impulse + energy losses with Adam. Throws Diverged on NaN loss
/// and EmptyTrainingSet for fewer than 8 scenarios.
ForceTrainResult train_force_model(const ForceDataset& dataset, const ForceModelConfig& config);

} // namespace pitdyn::fm
