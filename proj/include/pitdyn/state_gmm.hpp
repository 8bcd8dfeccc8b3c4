#pragma once

#include <Eigen/Core>
#include <vector>

namespace pitdyn {

/// Mixture distribution over the next [v_x, v_y, psi_dot, phi_dot] state.
/// Covariances are diagonal, stored as variance 4-vectors.
struct StateGmm {
    std::vector<double> weights;                 // J, sum to 1
    std::vector<Eigen::Vector4d> means;          // J
    std::vector<Eigen::Vector4d> variances;      // J, diagonal entries

    int components() const { return static_cast<int>(weights.size()); }

    Eigen::Vector4d mean() const {
        Eigen::Vector4d m = Eigen::Vector4d::Zero();
        for (int j = 0; j < components(); ++j) m += weights[j] * means[j];
        return m;
    }
};

} // namespace pitdyn
