#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pitdyn/autodiff.hpp"

namespace pitdyn::nn {

using ad::Mat;
using ad::Tape;
using ad::Var;

enum class Activation { None, Swish, Tanh };

/// One dense parameter block. `frozen` layers receive zero optimizer updates.
struct DenseLayer {
    Mat W;                  // in x out
    Eigen::RowVectorXd b;   // 1 x out
    bool frozen = false;
    std::string name;

    // leaves bound during the current forward pass
    Var w_var, b_var;
};

/// Ordered collection of dense layers making up one network. Layer order is
/// the freezing order for fine-tuning.
class Model {
  public:
    int add_layer(int in, int out, const std::string& name, std::mt19937_64& rng);
    DenseLayer& layer(int i) { return layers_[i]; }
    const DenseLayer& layer(int i) const { return layers_[i]; }
    int num_layers() const { return static_cast<int>(layers_.size()); }

    /// Rebinds every layer as tape leaves; call once per forward pass.
    void bind(Tape& tape);

    /// x * W + b (x bound on the same tape).
    Var dense(Tape& tape, Var x, int i) const;
    Var dense_act(Tape& tape, Var x, int i, Activation act) const;

    /// Freeze the first floor(ratio * num_layers) layers.
    int freeze_prefix(double ratio);
    void unfreeze_all();

    /// FNV-1a hash over the layer shapes, for checkpoint compatibility.
    uint64_t architecture_hash() const;

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

  private:
    std::vector<DenseLayer> layers_;
};

/// Adam with bias correction; moments keyed by layer index.
class AdamOptimizer {
  public:
    explicit AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// Applies one step from the gradients recorded on `tape`; frozen layers
    /// are skipped.
    void step(Model& model, const Tape& tape);
    void reset() { m_.clear(); t_ = 0; }
    int64_t steps() const { return t_; }
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

  private:
    struct Moments {
        Mat m_w, v_w;
        Eigen::RowVectorXd m_b, v_b;
    };
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Moments> m_;
};

/// Scaled-uniform fan-in initialization.
Mat init_weight(int in, int out, std::mt19937_64& rng);

struct CheckpointMeta {
    uint64_t seed = 0;
    int epoch = 0;
    uint64_t architecture_hash = 0;
    bool trained = false;
    std::string extra_json = "{}"; // model-specific metadata blob
};

/// Flat binary container, JSON header + raw little-endian doubles.
void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta);
CheckpointMeta load_checkpoint(const std::string& path, Model& model);

} // namespace pitdyn::nn
