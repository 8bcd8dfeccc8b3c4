#include "pitdyn/apinn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "pitdyn/errors.hpp"

namespace pitdyn::ap {

using ad::Mat;
using ad::Tape;
using ad::Var;
using nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kForceScale = 1e-4;
constexpr double kCoastForceEps = 1.0; // [N] negligible-force threshold

enum Layer {
    kComb1, kComb2, kVenc1, kVenc2, kVenc3, kAttnQ, kAttnK, kAttnV, kTrunk1, kTrunk2,
    kHeadW, kHeadMu, kHeadSigma, kHeadDelta, kBScale, kLayerCount
};

nn::Model build_net(const ApinnConfig& c, std::mt19937_64& rng) {
    const int in_dim = 4 + c.pe_dim + 6;
    nn::Model m;
    m.add_layer(in_dim, c.hidden, "comb1", rng);
    m.add_layer(c.hidden, c.hidden, "comb2", rng);
    m.add_layer(8, c.hidden, "venc1", rng);
    m.add_layer(c.hidden, c.hidden, "venc2", rng);
    m.add_layer(c.hidden, c.hidden, "venc3", rng);
    m.add_layer(c.hidden, c.hidden, "attn_q", rng);
    m.add_layer(c.hidden, c.hidden, "attn_k", rng);
    m.add_layer(c.hidden, c.hidden, "attn_v", rng);
    m.add_layer(c.hidden, c.hidden, "trunk1", rng);
    m.add_layer(c.hidden, c.hidden, "trunk2", rng);
    m.add_layer(c.hidden, c.J, "head_w", rng);
    const int mu = m.add_layer(c.hidden, 4 * c.J, "head_mu", rng);
    m.add_layer(c.hidden, 4 * c.J, "head_sigma", rng);
    const int del = m.add_layer(c.hidden, 4 * c.J, "head_delta", rng);
    m.add_layer(1, 4, "bscale", rng);
    // small-output-head initialization: start at the 4DOF prior so rollouts
    // only deviate where the data supports a correction
    m.layer(mu).W *= 0.02;
    m.layer(mu).b *= 0.02;
    m.layer(del).W *= 0.02;
    m.layer(del).b *= 0.02;
    return m;
}

Eigen::Matrix<double, 1, Eigen::Dynamic> vehicle_features(const VehicleParams& p) {
    Eigen::Matrix<double, 1, Eigen::Dynamic> f(1, 8);
    const double c_avg = 0.25 * (p.C[0] + p.C[1] + p.C[2] + p.C[3]);
    f << p.m / 2000.0, p.I_zz / 3200.0, p.l_f / 1.25, p.l_r / 1.45, p.t_w / 1.56,
        c_avg / 8.0, p.mu_s / 0.9, p.K_s / 90000.0;
    return f;
}

Eigen::RowVectorXd input_row(const ApinnConfig& cfg, const VehicleState& s,
                             const PlanarForce& body, double t) {
    Eigen::RowVectorXd row(4 + cfg.pe_dim + 6);
    row(0) = body.F_x * kForceScale;
    row(1) = body.F_y * kForceScale;
    row(2) = body.M_z * kForceScale;
    row(3) = body.M_x * kForceScale;
    row.segment(4, cfg.pe_dim) = ad::time_encoding(t, cfg.pe_dim).transpose();
    const int o = 4 + cfg.pe_dim;
    row(o + 0) = s.v_x / 20.0;
    row(o + 1) = s.v_y / 10.0;
    row(o + 2) = s.psi_dot / 2.0;
    row(o + 3) = s.phi / 0.5;
    row(o + 4) = s.phi_dot / 2.0;
    row(o + 5) = std::hypot(s.v_x, s.v_y) / 20.0;
    return row;
}

/// [v_x_dot, v_y_dot, psi_dd, phi_dd] of the 4DOF right-hand side.
Eigen::Vector4d rhs4(const VehicleState& s, const VehicleParams& p, const PlanarForce& body) {
    const auto d = state_derivative(s, p, 0.0, body, true);
    return {d(0), d(1), d(3), d(5)};
}

struct Fwd {
    Var omega;                // N x J
    std::vector<Var> mu;      // J entries, N x 4
    std::vector<Var> var;     // J entries, N x 4
    std::vector<Var> delta;   // J entries, N x 4
    Var scales;               // 1 x 4 boundary scales s_i
    Var mu_mean;              // N x 4
};

Fwd run_forward(Tape& t, const nn::Model& net, const ApinnConfig& cfg, const Mat& input,
                const Eigen::Matrix<double, 1, Eigen::Dynamic>& theta_veh, const Mat& prior,
                const Mat& base) {
    const int N = static_cast<int>(input.rows());

    Var h_c = net.dense_act(t, t.constant(input), kComb1, nn::Activation::Swish);
    h_c = net.dense_act(t, h_c, kComb2, nn::Activation::Swish);

    Var h_v = net.dense_act(t, t.constant(theta_veh), kVenc1, nn::Activation::Swish);
    h_v = net.dense_act(t, h_v, kVenc2, nn::Activation::Swish);
    h_v = net.dense_act(t, h_v, kVenc3, nn::Activation::Swish);

    // cross-attention: query from the combined features, tokens
    // {combined row, vehicle encoding}
    Var h_v_b = t.broadcast_rows(h_v, N);
    Var Q = net.dense(t, h_c, kAttnQ);
    Var K1 = net.dense(t, h_c, kAttnK);
    Var K2 = net.dense(t, h_v_b, kAttnK);
    Var V1 = net.dense(t, h_c, kAttnV);
    Var V2 = net.dense(t, h_v_b, kAttnV);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    Var s1 = t.scale(t.row_sum(t.mul(Q, K1)), inv_sqrt);
    Var s2 = t.scale(t.row_sum(t.mul(Q, K2)), inv_sqrt);
    Var attw = t.softmax_rows(t.concat_cols({s1, s2}));
    Var fused = t.add(t.mul_colvec(t.slice_cols(attw, 0, 1), V1),
                      t.mul_colvec(t.slice_cols(attw, 1, 1), V2));

    Var z = net.dense_act(t, fused, kTrunk1, nn::Activation::Swish);
    z = net.dense_act(t, z, kTrunk2, nn::Activation::Swish);

    Fwd out;
    out.omega = t.softmax_rows(net.dense(t, z, kHeadW));
    Var zmu = net.dense(t, z, kHeadMu);
    Var zsig = net.dense(t, z, kHeadSigma);
    Var zdel = net.dense(t, z, kHeadDelta);
    out.scales = t.add_scalar(t.softplus(net.layer(kBScale).w_var), 0.05);

    Mat bound_rows(N, 4);
    for (int i = 0; i < N; ++i) bound_rows.row(i) = cfg.schedule.sigma_bound.transpose();
    Var prior_c = t.constant(prior);
    Var base_c = t.constant(base);

    out.mu.resize(cfg.J);
    out.var.resize(cfg.J);
    out.delta.resize(cfg.J);
    Var mm;
    for (int j = 0; j < cfg.J; ++j) {
        Var raw = t.slice_cols(zmu, 4 * j, 4);
        if (cfg.center_on_prior)
            out.mu[j] = t.add(prior_c, t.mul(t.tanh(raw), t.constant(bound_rows)));
        else
            out.mu[j] = t.add(base_c, raw);
        out.var[j] = t.add_scalar(t.exp(t.slice_cols(zsig, 4 * j, 4)), cfg.sigma_min_sq);
        out.delta[j] = t.slice_cols(zdel, 4 * j, 4);
        Var weighted = t.mul_colvec(t.slice_cols(out.omega, j, 1), out.mu[j]);
        mm = j == 0 ? weighted : t.add(mm, weighted);
    }
    out.mu_mean = mm;
    return out;
}

Eigen::Vector4d state4(const VehicleState& s) {
    return {s.v_x, s.v_y, s.psi_dot, s.phi_dot};
}

} // namespace

void AdaptiveSchedule::validate() const {
    if (!(lambda_min > 0.0 && lambda_min < lambda_max))
        throw ConfigError("AdaptiveSchedule: need 0 < lambda_min < lambda_max");
    if (tau <= 0.0 || h_bandwidth <= 0.0 || lambda_boundary < 0.0 || tau_consistency <= 0.0)
        throw ConfigError("AdaptiveSchedule: non-positive constant");
    if ((sigma_bound.array() <= 0.0).any())
        throw ConfigError("AdaptiveSchedule: sigma_bound must be positive");
}

void ApinnConfig::validate() const {
    schedule.validate();
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("ApinnConfig: ") + what);
    };
    require(J >= 1 && J <= 8, "J out of [1, 8]");
    require(hidden >= 4, "hidden too small");
    require(pe_dim >= 2 && pe_dim % 2 == 0, "pe_dim must be even");
    require(step_dt > 0.0, "step_dt must be positive");
    require(epochs_pretrain >= 1, "epochs_pretrain must be >= 1");
    require(epochs_finetune >= 0, "epochs_finetune must be >= 0");
    require(lr > 0.0, "lr must be positive");
    require(window >= 2, "window must be >= 2");
    require(windows_per_traj >= 1, "windows_per_traj must be >= 1");
    require(freeze_ratio >= 0.0 && freeze_ratio < 1.0, "freeze_ratio out of [0, 1)");
    require((bounds.array() > 0.0).all(), "bounds must be positive");
    require(sigma_min_sq > 0.0, "sigma_min_sq must be positive");
}

double adaptive_weight(double epoch, const AdaptiveSchedule& s, double dq) {
    return s.lambda_min +
           (s.lambda_max - s.lambda_min) * ad::sigmoid((epoch - s.t0) / s.tau) * dq;
}

double data_quality(const Eigen::Vector2d& feature,
                    const std::vector<Eigen::Vector2d>& training_features, double h_bandwidth) {
    if (training_features.empty())
        throw EmptyTrainingSet("data_quality: empty training feature set");
    double d = std::numeric_limits<double>::infinity();
    for (const auto& f : training_features) d = std::min(d, (feature - f).norm());
    return std::exp(-d / h_bandwidth);
}

double soft_boundary_loss(const Eigen::Vector4d& prediction, const Eigen::Vector4d& bounds,
                          const Eigen::Vector4d& scales, double lambda_boundary) {
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        if (scales(i) <= 0.0) throw ConfigError("soft_boundary_loss: scale must be positive");
        const double sp = ad::softplus((std::abs(prediction(i)) - bounds(i)) / scales(i));
        total += sp * sp;
    }
    return lambda_boundary * total;
}

double balance_ratio(double l_data, double l_physics) {
    if (l_data == 0.0 && l_physics == 0.0) return 0.5;
    return l_data / (l_data + l_physics);
}

double auto_adjust(double lambda_physics, double ratio) {
    return std::max(lambda_physics * std::max(0.1, ratio), 0.01);
}

double physics_residual_loss(const std::vector<VehicleState>& states, double dt,
                             const ForceCurve& force, const ForceApplication& app,
                             const VehicleParams& params, double lambda_physics) {
    if (lambda_physics == 0.0) return 0.0;
    if (states.size() < 3) throw DimMismatch("physics_residual_loss: need >= 3 states");
    double total = 0.0;
    int n = 0;
    for (size_t i = 1; i + 1 < states.size(); ++i) {
        const double t = static_cast<double>(i) * dt;
        const PlanarForce body =
            body_force_from_ground(force.at(t), states[i].psi, app, params);
        const Eigen::Vector4d f = rhs4(states[i], params, body);
        const Eigen::Vector4d d =
            (state4(states[i + 1]) - state4(states[i - 1])) / (2.0 * dt);
        total += (d - f).squaredNorm();
        ++n;
    }
    return lambda_physics * total / n;
}

double consistency_loss(const StateGmm& gmm, double tau_consistency) {
    double total = 0.0;
    for (int j = 0; j < gmm.components(); ++j)
        for (int k = j + 1; k < gmm.components(); ++k)
            total += std::exp(-(gmm.means[j] - gmm.means[k]).squaredNorm() /
                              (2.0 * tau_consistency * tau_consistency));
    return total;
}

Eigen::Vector4d prior_step(const VehicleState& state, const VehicleParams& params,
                           const Eigen::Vector2d& force_ground, const ForceApplication& app,
                           double dt) {
    VehicleState s = state;
    const int substeps = std::max(1, static_cast<int>(std::lround(dt / 1e-3)));
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i) {
        auto deriv = [&](const VehicleState& x) {
            const PlanarForce body = body_force_from_ground(force_ground, x.psi, app, params);
            return state_derivative(x, params, 0.0, body, true);
        };
        auto advance = [&](const VehicleState& x, const Eigen::Matrix<double, 8, 1>& d,
                           double step) {
            VehicleState y = x;
            y.v_x += d(0) * step;
            y.v_y += d(1) * step;
            y.psi += d(2) * step;
            y.psi_dot += d(3) * step;
            y.phi += d(4) * step;
            y.phi_dot += d(5) * step;
            y.X += d(6) * step;
            y.Y += d(7) * step;
            return y;
        };
        const auto k0 = deriv(s);
        s.a_x = k0(0) - s.v_y * s.psi_dot;
        s.a_y = k0(1) + s.v_x * s.psi_dot;
        // first slope recomputed with the refreshed acceleration cache, as in
        // the reference integrator
        const auto k1 = deriv(s);
        const auto k2 = deriv(advance(s, k1, 0.5 * h));
        const auto k3 = deriv(advance(s, k2, 0.5 * h));
        const auto k4 = deriv(advance(s, k3, h));
        s = advance(s, Eigen::Matrix<double, 8, 1>((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0), h);
    }
    return state4(s);
}

ApinnModel::ApinnModel(const ApinnConfig& config, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    net_ = build_net(config_, rng);
}

Eigen::Vector4d ApinnModel::boundary_scales() const {
    const Mat& w = net_.layer(kBScale).W;
    Eigen::Vector4d s;
    for (int i = 0; i < 4; ++i) s(i) = ad::softplus(w(0, i)) + 0.05;
    return s;
}

StateGmm ApinnModel::predict_next(const VehicleState& state, const Eigen::Vector2d& force_ground,
                                  const ForceApplication& app, const VehicleParams& params,
                                  double t) const {
    if (!trained_) throw UntrainedWeights("ApinnModel::predict_next: untrained checkpoint");
    const PlanarForce body = body_force_from_ground(force_ground, state.psi, app, params);
    Mat input(1, 4 + config_.pe_dim + 6);
    input.row(0) = input_row(config_, state, body, t);
    Mat prior(1, 4);
    prior.row(0) = prior_step(state, params, force_ground, app, config_.step_dt).transpose();
    Mat base(1, 4);
    base.row(0) = state4(state).transpose();

    Tape tape;
    const_cast<nn::Model&>(net_).bind(tape);
    const Fwd f = run_forward(tape, net_, config_, input, vehicle_features(params), prior, base);

    StateGmm g;
    for (int j = 0; j < config_.J; ++j) {
        g.weights.push_back(tape.value(f.omega)(0, j));
        g.means.push_back(tape.value(f.mu[j]).row(0).transpose());
        g.variances.push_back(tape.value(f.var[j]).row(0).transpose());
    }
    return g;
}

RolloutResult ApinnModel::rollout(const VehicleState& initial, const ForceCurve& force,
                                  const ForceApplication& app, const VehicleParams& params,
                                  double horizon) const {
    if (!trained_) throw UntrainedWeights("ApinnModel::rollout: untrained checkpoint");
    const double dt = config_.step_dt;
    const int steps = static_cast<int>(std::lround(horizon / dt));
    RolloutResult out;
    VehicleState s = initial;
    out.traj.t.push_back(0.0);
    out.traj.states.push_back(s);
    for (int i = 0; i < steps; ++i) {
        const double t = i * dt;
        const Eigen::Vector2d F = force.at(t);
        const StateGmm g = predict_next(s, F, app, params, t);
        const Eigen::Vector4d m = g.mean();
        VehicleState next = s;
        next.v_x = m(0);
        next.v_y = m(1);
        next.psi_dot = m(2);
        next.phi_dot = m(3);
        if (F.norm() < kCoastForceEps) {
            // physics guard: coasting cannot gain ground speed
            const double sp_old = std::hypot(s.v_x, s.v_y);
            const double sp_new = std::hypot(next.v_x, next.v_y);
            if (sp_new > sp_old && sp_new > 1e-9) {
                next.v_x *= sp_old / sp_new;
                next.v_y *= sp_old / sp_new;
            }
        }
        next.psi = s.psi + next.psi_dot * dt;
        next.phi = s.phi + next.phi_dot * dt;
        next.X = s.X + (s.v_x * std::cos(s.psi) - s.v_y * std::sin(s.psi)) * dt;
        next.Y = s.Y + (s.v_x * std::sin(s.psi) + s.v_y * std::cos(s.psi)) * dt;
        next.a_x = (next.v_x - s.v_x) / dt - s.v_y * s.psi_dot;
        next.a_y = (next.v_y - s.v_y) / dt + s.v_x * s.psi_dot;
        if (std::hypot(next.v_x, next.v_y) > 150.0 || std::abs(next.psi_dot) > 50.0)
            throw IntegrationDiverged("ApinnModel::rollout: state guard tripped at t=" +
                                      std::to_string(t));
        s = next;
        out.traj.t.push_back((i + 1) * dt);
        out.traj.states.push_back(s);
        out.gmms.push_back(g);
    }
    return out;
}

void ApinnModel::save(const std::string& path) const {
    nn::CheckpointMeta meta;
    meta.seed = seed_;
    meta.architecture_hash = net_.architecture_hash();
    meta.trained = trained_;
    json extra;
    extra["kind"] = "apinn";
    extra["J"] = config_.J;
    extra["hidden"] = config_.hidden;
    extra["pe_dim"] = config_.pe_dim;
    extra["step_dt"] = config_.step_dt;
    extra["epochs_pretrain"] = config_.epochs_pretrain;
    extra["epochs_finetune"] = config_.epochs_finetune;
    extra["lr"] = config_.lr;
    extra["window"] = config_.window;
    extra["windows_per_traj"] = config_.windows_per_traj;
    extra["seed"] = config_.seed;
    extra["lambda_traj"] = config_.lambda_traj;
    extra["lambda_smooth"] = config_.lambda_smooth;
    extra["lambda_phys_gmm"] = config_.lambda_phys_gmm;
    extra["lambda_consistency"] = config_.lambda_consistency;
    extra["lambda_nll"] = config_.lambda_nll;
    extra["freeze_ratio"] = config_.freeze_ratio;
    extra["physics_enabled"] = config_.physics_enabled;
    extra["center_on_prior"] = config_.center_on_prior;
    extra["sigma_min_sq"] = config_.sigma_min_sq;
    extra["bounds"] = {config_.bounds(0), config_.bounds(1), config_.bounds(2),
                       config_.bounds(3)};
    const auto& sc = config_.schedule;
    extra["schedule"] = {{"lambda_min", sc.lambda_min},     {"lambda_max", sc.lambda_max},
                         {"t0", sc.t0},                     {"tau", sc.tau},
                         {"h_bandwidth", sc.h_bandwidth},   {"lambda_boundary", sc.lambda_boundary},
                         {"tau_consistency", sc.tau_consistency},
                         {"sigma_bound", {sc.sigma_bound(0), sc.sigma_bound(1),
                                          sc.sigma_bound(2), sc.sigma_bound(3)}}};
    meta.extra_json = extra.dump();
    nn::save_checkpoint(path, net_, meta);
}

ApinnModel ApinnModel::load(const std::string& path) {
    ApinnModel m;
    const nn::CheckpointMeta meta = nn::load_checkpoint(path, m.net_);
    const json extra = json::parse(meta.extra_json, nullptr, false);
    if (extra.is_discarded() || extra.value("kind", "") != std::string("apinn"))
        throw ConfigError("not an apinn checkpoint: " + path);
    ApinnConfig& c = m.config_;
    c.J = extra["J"].get<int>();
    c.hidden = extra["hidden"].get<int>();
    c.pe_dim = extra["pe_dim"].get<int>();
    c.step_dt = extra["step_dt"].get<double>();
    c.epochs_pretrain = extra["epochs_pretrain"].get<int>();
    c.epochs_finetune = extra["epochs_finetune"].get<int>();
    c.lr = extra["lr"].get<double>();
    c.window = extra["window"].get<int>();
    c.windows_per_traj = extra["windows_per_traj"].get<int>();
    c.seed = extra["seed"].get<uint64_t>();
    c.lambda_traj = extra["lambda_traj"].get<double>();
    c.lambda_smooth = extra["lambda_smooth"].get<double>();
    c.lambda_phys_gmm = extra["lambda_phys_gmm"].get<double>();
    c.lambda_consistency = extra["lambda_consistency"].get<double>();
    c.lambda_nll = extra["lambda_nll"].get<double>();
    c.freeze_ratio = extra["freeze_ratio"].get<double>();
    c.physics_enabled = extra["physics_enabled"].get<bool>();
    c.center_on_prior = extra["center_on_prior"].get<bool>();
    c.sigma_min_sq = extra["sigma_min_sq"].get<double>();
    for (int i = 0; i < 4; ++i) c.bounds(i) = extra["bounds"][i].get<double>();
    const json& sc = extra["schedule"];
    c.schedule.lambda_min = sc["lambda_min"].get<double>();
    c.schedule.lambda_max = sc["lambda_max"].get<double>();
    c.schedule.t0 = sc["t0"].get<double>();
    c.schedule.tau = sc["tau"].get<double>();
    c.schedule.h_bandwidth = sc["h_bandwidth"].get<double>();
    c.schedule.lambda_boundary = sc["lambda_boundary"].get<double>();
    c.schedule.tau_consistency = sc["tau_consistency"].get<double>();
    for (int i = 0; i < 4; ++i) c.schedule.sigma_bound(i) = sc["sigma_bound"][i].get<double>();
    m.trained_ = meta.trained;
    m.seed_ = meta.seed;
    return m;
}

namespace {

struct PreparedTraj {
    Mat inputs;   // S x in_dim
    Mat priors;   // S x 4
    Mat bases;    // S x 4 (current 4-state)
    Mat targets;  // S x 4 (next 4-state)
    Mat rhs;      // S x 4 (4DOF right-hand side at current state)
    Mat dpos;     // S x 2 (true global position delta)
    Eigen::VectorXd cpsi, spsi;
    Eigen::Matrix<double, 1, Eigen::Dynamic> theta_veh;
    int usable = 0;
};

PreparedTraj prepare(const ApinnConfig& cfg, const TrajectorySample& sample) {
    const Trajectory& tr = sample.traj;
    PreparedTraj p;
    const int S = static_cast<int>(tr.states.size()) - 1;
    if (S < cfg.window) return p;
    const int in_dim = 4 + cfg.pe_dim + 6;
    p.inputs.resize(S, in_dim);
    p.priors.resize(S, 4);
    p.bases.resize(S, 4);
    p.targets.resize(S, 4);
    p.rhs.resize(S, 4);
    p.dpos.resize(S, 2);
    p.cpsi.resize(S);
    p.spsi.resize(S);
    p.theta_veh = vehicle_features(sample.params);
    for (int i = 0; i < S; ++i) {
        const double t = tr.t[i];
        const VehicleState& s = tr.states[i];
        const Eigen::Vector2d F = sample.force.at(t);
        const PlanarForce body = body_force_from_ground(F, s.psi, sample.app, sample.params);
        p.inputs.row(i) = input_row(cfg, s, body, t);
        p.priors.row(i) =
            prior_step(s, sample.params, F, sample.app, cfg.step_dt).transpose();
        p.bases.row(i) = state4(s).transpose();
        p.targets.row(i) = state4(tr.states[i + 1]).transpose();
        p.rhs.row(i) = rhs4(s, sample.params, body).transpose();
        p.dpos(i, 0) = tr.states[i + 1].X - s.X;
        p.dpos(i, 1) = tr.states[i + 1].Y - s.Y;
        p.cpsi(i) = std::cos(s.psi);
        p.spsi(i) = std::sin(s.psi);
    }
    p.usable = S;
    return p;
}

} // namespace

ApinnTrainResult train_apinn(const TrajectoryDataset& pretrain,
                             const TrajectoryDataset& finetune, const ApinnConfig& config) {
    config.validate();
    if (pretrain.empty()) throw EmptyTrainingSet("train_apinn: empty pretrain dataset");

    std::mt19937_64 rng(config.seed);
    ApinnTrainResult result;
    ApinnModel model(config, rng);
    model.seed_ = config.seed;

    std::vector<PreparedTraj> pre, fin;
    for (const auto& s : pretrain) pre.push_back(prepare(config, s));
    for (const auto& s : finetune) fin.push_back(prepare(config, s));

    const int W = config.window;
    const double dt = config.step_dt;
    Mat D; // second-difference operator
    if (W >= 3) {
        D = Mat::Zero(W - 2, W);
        for (int i = 0; i < W - 2; ++i) {
            D(i, i) = 1.0;
            D(i, i + 1) = -2.0;
            D(i, i + 2) = 1.0;
        }
    }
    Mat bound_rows(W, 4);
    for (int i = 0; i < W; ++i) bound_rows.row(i) = config.bounds.transpose();

    nn::AdamOptimizer opt(config.lr);
    double prev_data = 0.0, prev_phys = 0.0;
    bool have_prev = false;

    auto window_loss = [&](Tape& t, const PreparedTraj& p, int start, double lambda_phys,
                           bool corrected, double* data_out, double* phys_out) {
        const Mat in = p.inputs.middleRows(start, W);
        const Mat prior = p.priors.middleRows(start, W);
        const Mat base = p.bases.middleRows(start, W);
        const Fwd f = run_forward(t, model.net_, config, in, p.theta_veh, prior, base);
        Var target = t.constant(p.targets.middleRows(start, W));

        // data loss: MSE of the mixture mean plus an NLL share
        Var mse = t.mean(t.square(t.sub(f.mu_mean, target)));
        std::vector<Var> cols(config.J);
        for (int j = 0; j < config.J; ++j) {
            Var d = t.sub(target, f.mu[j]);
            Var quad = t.row_sum(t.divide(t.square(d), f.var[j]));
            Var logdet = t.row_sum(t.log(f.var[j]));
            Var logpi = t.log(t.slice_cols(f.omega, j, 1));
            cols[j] = t.add_scalar(t.add(logpi, t.scale(t.add(quad, logdet), -0.5)),
                                   -2.0 * kLog2Pi);
        }
        Var nll = t.scale(t.mean(t.logsumexp_rows(t.concat_cols(cols))), -1.0);
        Var l_data = t.add(mse, t.scale(nll, config.lambda_nll));

        // trajectory loss: one-step global-position error of the mean
        Var vx = t.slice_cols(f.mu_mean, 0, 1);
        Var vy = t.slice_cols(f.mu_mean, 1, 1);
        Var cc = t.constant(Mat(p.cpsi.segment(start, W)));
        Var ss = t.constant(Mat(p.spsi.segment(start, W)));
        Var px = t.scale(t.sub(t.mul(cc, vx), t.mul(ss, vy)), dt);
        Var py = t.scale(t.add(t.mul(ss, vx), t.mul(cc, vy)), dt);
        Var perr = t.sub(t.concat_cols({px, py}),
                         t.constant(p.dpos.middleRows(start, W)));
        Var l_traj = t.scale(t.mean(t.square(perr)), config.lambda_traj);

        Var total = t.add(l_data, l_traj);
        if (W >= 3 && config.lambda_smooth > 0.0) {
            Var d2 = t.matmul(t.constant(D), f.mu_mean);
            total = t.add(total, t.scale(t.mean(t.square(d2)), config.lambda_smooth));
        }

        double phys_val = 0.0;
        if (config.physics_enabled) {
            // Physics residual of the mixture mean against the 4DOF rhs; during
            // adaptation the rhs is offset by the mixture of the learned
            // corrections, otherwise the stale reference model pins the mean
            Var ref = t.constant(p.rhs.middleRows(start, W));
            if (corrected)
                for (int j = 0; j < config.J; ++j)
                    ref = t.add(ref, t.mul_colvec(t.slice_cols(f.omega, j, 1), f.delta[j]));
            Var resid = t.sub(t.scale(t.sub(f.mu_mean, t.constant(base)), 1.0 / dt), ref);
            Var l_phys = t.mean(t.square(resid));

            // per-component residual with learnable correction delta_j
            Var l_gmm;
            for (int j = 0; j < config.J; ++j) {
                Var rj = t.sub(t.scale(t.sub(f.mu[j], t.constant(base)), 1.0 / dt),
                               t.add(t.constant(p.rhs.middleRows(start, W)), f.delta[j]));
                Var wj = t.mean(t.mul_colvec(t.slice_cols(f.omega, j, 1), t.square(rj)));
                l_gmm = j == 0 ? wj : t.add(l_gmm, wj);
            }

            // component over-clustering penalty
            Var l_cons;
            bool first = true;
            for (int j = 0; j < config.J; ++j)
                for (int k = j + 1; k < config.J; ++k) {
                    Var d2m = t.row_sum(t.square(t.sub(f.mu[j], f.mu[k])));
                    Var term = t.mean(t.exp(t.scale(
                        d2m, -1.0 / (2.0 * config.schedule.tau_consistency *
                                     config.schedule.tau_consistency))));
                    l_cons = first ? term : t.add(l_cons, term);
                    first = false;
                }

            // soft state boundary with learnable scales
            Var arg = t.divide(t.sub(t.abs(f.mu_mean), t.constant(bound_rows)),
                               t.broadcast_rows(f.scales, W));
            Var l_bound = t.mean(t.square(t.softplus(arg)));

            Var phys = t.add(t.scale(l_phys, lambda_phys),
                             t.scale(l_gmm, config.lambda_phys_gmm));
            if (!first) phys = t.add(phys, t.scale(l_cons, config.lambda_consistency));
            phys = t.add(phys, t.scale(l_bound, config.schedule.lambda_boundary));
            total = t.add(total, phys);
            phys_val = t.value(phys)(0, 0);
            ++result.physics_evals;
        }
        *data_out = t.value(l_data)(0, 0);
        *phys_out = phys_val;
        return total;
    };

    auto run_phase = [&](const std::vector<PreparedTraj>& data, int epochs, int epoch_offset,
                         bool adapt) {
        for (int e = 0; e < epochs; ++e) {
            const int epoch = epoch_offset + e;
            // during adaptation the reference rhs is known to be mismatched, so
            // the mean residual keeps its floor weight; the delta-corrected
            // per-component term still anchors the physics structure
            double lambda_phys = config.schedule.lambda_min;
            if (adapt) {
                lambda_phys = adaptive_weight(epoch, config.schedule, 1.0);
                if (have_prev)
                    lambda_phys = auto_adjust(lambda_phys, balance_ratio(prev_data, prev_phys));
            }
            double sum_loss = 0.0, sum_data = 0.0, sum_phys = 0.0;
            int n_windows = 0;
            // one optimizer step per sweep; each step averages one window from
            // every trajectory so updates reflect the shared correction, not
            // the idiosyncrasies of a single window
            for (int w = 0; w < config.windows_per_traj; ++w) {
                Tape t;
                model.net_.bind(t);
                Var batch;
                int nb = 0;
                for (const auto& p : data) {
                    if (p.usable < W) continue;
                    std::uniform_int_distribution<int> pick(0, p.usable - W);
                    const int start = pick(rng);
                    double dval = 0.0, pval = 0.0;
                    Var loss = window_loss(t, p, start, lambda_phys, !adapt, &dval, &pval);
                    batch = nb == 0 ? loss : t.add(batch, loss);
                    sum_data += dval;
                    sum_phys += pval;
                    ++nb;
                }
                if (nb == 0) throw EmptyTrainingSet("train_apinn: no usable windows");
                batch = t.scale(batch, 1.0 / nb);
                const double lv = t.value(batch)(0, 0);
                if (!std::isfinite(lv))
                    throw Diverged("train_apinn: loss NaN at epoch " +
                                   std::to_string(epoch) + " seed " +
                                   std::to_string(config.seed));
                t.backward(batch);
                opt.step(model.net_, t);
                sum_loss += lv * nb;
                n_windows += nb;
            }
            prev_data = sum_data / n_windows;
            prev_phys = sum_phys / n_windows;
            have_prev = true;
            ApinnHistoryRow row;
            row.epoch = epoch;
            row.train_loss = sum_loss / n_windows;
            row.val_loss = row.train_loss;
            row.physics_loss = prev_phys;
            row.balance = balance_ratio(prev_data, prev_phys);
            row.lambda_physics = lambda_phys;
            result.history.push_back(row);
        }
    };

    run_phase(pre, config.epochs_pretrain, 0, true);

    bool any_finetune = false;
    for (const auto& p : fin) any_finetune |= p.usable >= W;
    if (any_finetune && config.epochs_finetune > 0) {
        result.frozen_layers = model.net_.freeze_prefix(config.freeze_ratio);
        opt.reset();
        run_phase(fin, config.epochs_finetune, config.epochs_pretrain, false);
    }

    model.trained_ = true;
    result.model = std::move(model);
    return result;
}

double eval_physics_residual(const ApinnModel& model, const TrajectoryDataset& dataset,
                             int max_samples) {
    const double dt = model.config().step_dt;
    double total = 0.0;
    int n = 0;
    for (const auto& sample : dataset) {
        for (size_t i = 0; i + 1 < sample.traj.states.size() && n < max_samples; ++i) {
            const double t = sample.traj.t[i];
            const VehicleState& s = sample.traj.states[i];
            const Eigen::Vector2d F = sample.force.at(t);
            const StateGmm g = model.predict_next(s, F, sample.app, sample.params, t);
            const PlanarForce body = body_force_from_ground(F, s.psi, sample.app, sample.params);
            const Eigen::Vector4d f = rhs4(s, sample.params, body);
            total += ((g.mean() - state4(s)) / dt - f).squaredNorm();
            ++n;
        }
        if (n >= max_samples) break;
    }
    if (n == 0) throw EmptyTrainingSet("eval_physics_residual: empty dataset");
    return total / n;
}

} // namespace pitdyn::ap
