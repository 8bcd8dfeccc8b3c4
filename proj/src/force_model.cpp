#include "pitdyn/force_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pitdyn/errors.hpp"

namespace pitdyn::fm {

using ad::Mat;
using ad::Tape;
using ad::Var;
using nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093453; // log(2*pi)
constexpr double kWindowSharpness = 0.005;     // [s] smooth duration window

// layer order inside the network; freezing and forward code index by this
enum Layer {
    kEnc1, kEnc2, kEnc3, kTimeEmb, kAttnQ, kAttnK, kAttnV, kTrunk1, kTrunk2,
    kHeadBase, kHeadDt, kHeadW, kHeadDelta, kHeadS, kLayerCount
};

nn::Model build_net(const ForceModelConfig& c, std::mt19937_64& rng) {
    nn::Model m;
    m.add_layer(7, c.hidden, "enc1", rng);
    m.add_layer(c.hidden, c.hidden, "enc2", rng);
    m.add_layer(c.hidden, c.hidden, "enc3", rng);
    m.add_layer(c.pe_dim, c.hidden, "time_emb", rng);
    m.add_layer(c.hidden, c.hidden, "attn_q", rng);
    m.add_layer(c.hidden, c.hidden, "attn_k", rng);
    m.add_layer(c.hidden, c.hidden, "attn_v", rng);
    m.add_layer(c.hidden, c.hidden, "trunk1", rng);
    m.add_layer(c.hidden, c.hidden, "trunk2", rng);
    m.add_layer(c.hidden, 2, "head_base", rng);
    m.add_layer(c.hidden, 1, "head_dt", rng);
    m.add_layer(c.hidden, c.K, "head_w", rng);
    m.add_layer(c.hidden, 2 * c.K, "head_delta", rng);
    m.add_layer(c.hidden, 2 * c.K, "head_s", rng);
    return m;
}

struct Forward {
    Var pi;                  // N x K
    Var dt;                  // 1 x 1, seconds
    std::vector<Var> mu;     // K entries, N x 2 (scaled, windowed)
    std::vector<Var> var;    // K entries, N x 2 (scaled^2)
    Var mu_mean;             // N x 2 mixture mean (scaled, windowed)
};

/// Shared forward pass over a column of time samples for one theta.
Forward run_forward(Tape& t, const nn::Model& net, const ForceModelConfig& cfg,
                    const Eigen::Matrix<double, 7, 1>& theta_std,
                    const Eigen::VectorXd& times) {
    const int N = static_cast<int>(times.size());
    const int K = cfg.K;

    Var th = t.constant(theta_std.transpose());
    Var h_theta = net.dense_act(t, th, kEnc1, nn::Activation::Swish);
    h_theta = net.dense_act(t, h_theta, kEnc2, nn::Activation::Swish);
    h_theta = net.dense_act(t, h_theta, kEnc3, nn::Activation::Swish); // 1 x h

    Mat pe(N, cfg.pe_dim);
    for (int i = 0; i < N; ++i)
        pe.row(i) = ad::time_encoding(times(i) / cfg.dt_max, cfg.pe_dim).transpose();
    Var h_t = net.dense_act(t, t.constant(pe), kTimeEmb, nn::Activation::Swish); // N x h

    // two-token attention per time row: tokens {time embedding, theta encoding}
    Var h_theta_b = t.broadcast_rows(h_theta, N);
    Var Q = net.dense(t, h_t, kAttnQ);
    Var K1 = net.dense(t, h_t, kAttnK);
    Var K2 = net.dense(t, h_theta_b, kAttnK);
    Var V1 = net.dense(t, h_t, kAttnV);
    Var V2 = net.dense(t, h_theta_b, kAttnV);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    Var s1 = t.scale(t.row_sum(t.mul(Q, K1)), inv_sqrt);
    Var s2 = t.scale(t.row_sum(t.mul(Q, K2)), inv_sqrt);
    Var attw = t.softmax_rows(t.concat_cols({s1, s2})); // N x 2
    Var fused = t.add(t.mul_colvec(t.slice_cols(attw, 0, 1), V1),
                      t.mul_colvec(t.slice_cols(attw, 1, 1), V2));

    Var z = net.dense_act(t, fused, kTrunk1, nn::Activation::Swish);
    z = net.dense_act(t, z, kTrunk2, nn::Activation::Swish);

    Forward out;
    out.pi = t.softmax_rows(net.dense(t, z, kHeadW));
    out.dt = t.scale(t.sigmoid(net.dense(t, h_theta, kHeadDt)), cfg.dt_max);

    // smooth duration window, sigmoid((dt - t_i)/w) per row
    Var targ = t.scale(t.sub(t.broadcast_rows(out.dt, N),
                             t.constant(Mat(times))),
                       1.0 / kWindowSharpness);
    Var window = t.sigmoid(targ); // N x 1

    Var f_base = net.dense(t, z, kHeadBase);
    Var delta = net.dense(t, z, kHeadDelta);
    Var svals = net.dense(t, z, kHeadS);

    out.mu.resize(K);
    out.var.resize(K);
    Var mu_mean;
    for (int k = 0; k < K; ++k) {
        Var mu_k = t.add(f_base, t.slice_cols(delta, 2 * k, 2));
        out.mu[k] = t.mul_colvec(window, mu_k);
        out.var[k] = t.add_scalar(t.exp(t.slice_cols(svals, 2 * k, 2)),
                                  cfg.sigma_min * cfg.sigma_min);
        Var weighted = t.mul_colvec(t.slice_cols(out.pi, k, 1), out.mu[k]);
        mu_mean = k == 0 ? weighted : t.add(mu_mean, weighted);
    }
    out.mu_mean = mu_mean;
    return out;
}

Eigen::VectorXd grid_times(const ForceModelConfig& cfg) {
    const int n = static_cast<int>(std::lround(cfg.dt_max / cfg.grid_dt)) + 1;
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) t(i) = i * cfg.grid_dt;
    return t;
}

Eigen::VectorXd trapezoid_weights(int n, double dt) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, dt);
    w(0) = w(n - 1) = 0.5 * dt;
    return w;
}

} // namespace

Eigen::Vector2d ForceGmmSlice::mean() const {
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (int k = 0; k < components(); ++k) m += weights[k] * means[k];
    return m;
}

void ForceModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("ForceModelConfig: ") + what);
    };
    require(K >= 1 && K <= 8, "K out of [1, 8]");
    require(dt_max > 0.0, "dt_max must be positive");
    require(sigma_min > 0.0, "sigma_min must be positive");
    require(hidden >= 4, "hidden too small");
    require(pe_dim >= 2 && pe_dim % 2 == 0, "pe_dim must be even and >= 2");
    require(epochs >= 1, "epochs must be >= 1");
    require(lr > 0.0, "lr must be positive");
    require(batch >= 1, "batch must be >= 1");
    require(grid_dt > 0.0 && grid_dt < dt_max, "grid_dt out of range");
    require(lambda_imp >= 0.0 && lambda_eng >= 0.0, "negative physics weight");
}

ForceModel::ForceModel(const ForceModelConfig& config, std::mt19937_64& rng)
    : config_(config) {
    config_.validate();
    net_ = build_net(config_, rng);
}

ForceGmmSlice ForceModel::predict(const Eigen::Matrix<double, 7, 1>& theta, double t) const {
    if (!trained_) throw UntrainedWeights("ForceModel::predict: untrained checkpoint");
    if (t < 0.0 || t > config_.dt_max)
        throw ConfigError("ForceModel::predict: t outside [0, dt_max]");
    const Eigen::Matrix<double, 7, 1> std_theta =
        (theta - feat_mean).cwiseQuotient(feat_std);
    Tape tape;
    const_cast<nn::Model&>(net_).bind(tape);
    Eigen::VectorXd times(1);
    times(0) = t;
    const Forward f = run_forward(tape, net_, config_, std_theta, times);
    const double duration = tape.value(f.dt)(0, 0);

    ForceGmmSlice slice;
    for (int k = 0; k < config_.K; ++k) {
        slice.weights.push_back(tape.value(f.pi)(0, k));
        Eigen::Vector2d mu = tape.value(f.mu[k]).row(0).transpose() / kForceScale;
        if (t > duration) mu.setZero(); // hard window at inference
        slice.means.push_back(mu);
        slice.vars.push_back(tape.value(f.var[k]).row(0).transpose() /
                             (kForceScale * kForceScale));
    }
    return slice;
}

double ForceModel::predict_duration(const Eigen::Matrix<double, 7, 1>& theta) const {
    if (!trained_) throw UntrainedWeights("ForceModel::predict_duration: untrained checkpoint");
    const Eigen::Matrix<double, 7, 1> std_theta =
        (theta - feat_mean).cwiseQuotient(feat_std);
    Tape tape;
    const_cast<nn::Model&>(net_).bind(tape);
    Eigen::VectorXd times(1);
    times(0) = 0.0;
    const Forward f = run_forward(tape, net_, config_, std_theta, times);
    return tape.value(f.dt)(0, 0);
}

ForceCurve ForceModel::predict_curve(const Eigen::Matrix<double, 7, 1>& theta) const {
    if (!trained_) throw UntrainedWeights("ForceModel::predict_curve: untrained checkpoint");
    const Eigen::Matrix<double, 7, 1> std_theta =
        (theta - feat_mean).cwiseQuotient(feat_std);
    Tape tape;
    const_cast<nn::Model&>(net_).bind(tape);
    const Eigen::VectorXd times = grid_times(config_);
    const Forward f = run_forward(tape, net_, config_, std_theta, times);
    const double duration = tape.value(f.dt)(0, 0);

    ForceCurve curve;
    curve.dt = config_.grid_dt;
    curve.t_start = 0.0;
    curve.t_end = duration;
    const Mat& mm = tape.value(f.mu_mean);
    for (int i = 0; i < times.size(); ++i) {
        Eigen::Vector2d F = mm.row(i).transpose() / kForceScale;
        if (times(i) > duration) F.setZero();
        curve.samples.push_back(F);
    }
    return curve;
}

std::vector<Eigen::Vector2d> ForceModel::sample(const Eigen::Matrix<double, 7, 1>& theta,
                                                double t, int n, std::mt19937_64& rng) const {
    const ForceGmmSlice slice = predict(theta, t);
    std::discrete_distribution<int> pick(slice.weights.begin(), slice.weights.end());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::Vector2d> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int k = pick(rng);
        out.push_back(slice.means[k] +
                      Eigen::Vector2d(gauss(rng) * std::sqrt(slice.vars[k](0)),
                                      gauss(rng) * std::sqrt(slice.vars[k](1))));
    }
    return out;
}

void ForceModel::save(const std::string& path) const {
    nn::CheckpointMeta meta;
    meta.seed = seed_;
    meta.epoch = config_.epochs;
    meta.architecture_hash = net_.architecture_hash();
    meta.trained = trained_;
    json extra;
    extra["kind"] = "force_gmm";
    extra["K"] = config_.K;
    extra["dt_max"] = config_.dt_max;
    extra["lambda_imp"] = config_.lambda_imp;
    extra["lambda_eng"] = config_.lambda_eng;
    extra["sigma_min"] = config_.sigma_min;
    extra["hidden"] = config_.hidden;
    extra["pe_dim"] = config_.pe_dim;
    extra["epochs"] = config_.epochs;
    extra["lr"] = config_.lr;
    extra["batch"] = config_.batch;
    extra["grid_dt"] = config_.grid_dt;
    extra["seed"] = config_.seed;
    extra["feat_mean"] = std::vector<double>(feat_mean.data(), feat_mean.data() + 7);
    extra["feat_std"] = std::vector<double>(feat_std.data(), feat_std.data() + 7);
    meta.extra_json = extra.dump();
    nn::save_checkpoint(path, net_, meta);
}

ForceModel ForceModel::load(const std::string& path) {
    ForceModel m;
    const nn::CheckpointMeta meta = nn::load_checkpoint(path, m.net_);
    const json extra = json::parse(meta.extra_json, nullptr, false);
    if (extra.is_discarded() || extra.value("kind", "") != std::string("force_gmm"))
        throw ConfigError("not a force-model checkpoint: " + path);
    m.config_.K = extra["K"].get<int>();
    m.config_.dt_max = extra["dt_max"].get<double>();
    m.config_.lambda_imp = extra["lambda_imp"].get<double>();
    m.config_.lambda_eng = extra["lambda_eng"].get<double>();
    m.config_.sigma_min = extra["sigma_min"].get<double>();
    m.config_.hidden = extra["hidden"].get<int>();
    m.config_.pe_dim = extra["pe_dim"].get<int>();
    m.config_.epochs = extra["epochs"].get<int>();
    m.config_.lr = extra["lr"].get<double>();
    m.config_.batch = extra["batch"].get<int>();
    m.config_.grid_dt = extra["grid_dt"].get<double>();
    m.config_.seed = extra["seed"].get<uint64_t>();
    for (int i = 0; i < 7; ++i) {
        m.feat_mean(i) = extra["feat_mean"][i].get<double>();
        m.feat_std(i) = extra["feat_std"][i].get<double>();
    }
    m.trained_ = meta.trained;
    m.seed_ = meta.seed;
    return m;
}

double impulse_loss(const ForceCurve& curve, const ImpulseSolution& target, double lambda_imp) {
    const Eigen::Vector2d P = impulse_from_force(curve);
    const double ex = P(0) - target.P_x, ey = P(1) - target.P_y;
    return lambda_imp * (ex * ex + ey * ey);
}

double energy_loss(const ForceCurve& curve, const std::vector<Eigen::Vector2d>& v_rel,
                   double E_dissipated, double lambda_eng) {
    if (static_cast<int>(v_rel.size()) != curve.size())
        throw GridMismatch("energy_loss: v_rel grid does not match curve grid");
    if (curve.empty()) throw EmptyCurve("energy_loss: empty curve");
    double work = 0.0;
    for (int i = 0; i + 1 < curve.size(); ++i) {
        const double a = curve.samples[i].dot(v_rel[i]);
        const double b = curve.samples[i + 1].dot(v_rel[i + 1]);
        work += 0.5 * (a + b) * curve.dt;
    }
    const double err = work - E_dissipated;
    return lambda_eng * err * err;
}

double nll_loss(const std::vector<Eigen::Vector2d>& observed,
                const std::vector<ForceGmmSlice>& slices) {
    if (observed.size() != slices.size())
        throw GridMismatch("nll_loss: observation/slice count mismatch");
    double total = 0.0;
    for (size_t i = 0; i < observed.size(); ++i) {
        const ForceGmmSlice& s = slices[i];
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> logs(s.components());
        for (int k = 0; k < s.components(); ++k) {
            if (s.vars[k](0) <= 0.0 || s.vars[k](1) <= 0.0)
                throw DegenerateCovariance("nll_loss: non-positive variance");
            const Eigen::Vector2d d = observed[i] - s.means[k];
            logs[k] = std::log(std::max(s.weights[k], 1e-300)) - kLog2Pi -
                      0.5 * std::log(s.vars[k](0) * s.vars[k](1)) -
                      0.5 * (d(0) * d(0) / s.vars[k](0) + d(1) * d(1) / s.vars[k](1));
            best = std::max(best, logs[k]);
        }
        double acc = 0.0;
        for (double l : logs) acc += std::exp(l - best);
        total += -(best + std::log(acc));
    }
    return total / static_cast<double>(observed.size());
}

std::vector<Eigen::Vector2d> relative_velocity_profile(const CollisionScenario& scenario,
                                                       int samples) {
    const Eigen::Vector2d v0(scenario.v_bx - scenario.v_tx, scenario.v_by - scenario.v_ty);
    std::vector<Eigen::Vector2d> out(samples);
    for (int i = 0; i < samples; ++i) {
        const double a = samples > 1 ? static_cast<double>(i) / (samples - 1) : 0.0;
        // approach velocity decays linearly into an e-scaled separation velocity
        out[i] = v0 * (1.0 - a) + (-scenario.e * v0) * a;
    }
    return out;
}

ForceTrainResult train_force_model(const ForceDataset& dataset, const ForceModelConfig& config) {
    config.validate();
    if (dataset.size() < 8)
        throw EmptyTrainingSet("train_force_model: need at least 8 scenarios");

    // stratified 3:1 split by bullet mass, deterministic
    std::map<int64_t, std::vector<int>> by_mass;
    for (size_t i = 0; i < dataset.size(); ++i)
        by_mass[static_cast<int64_t>(std::lround(dataset[i].scenario.m_b))].push_back(
            static_cast<int>(i));
    ForceTrainResult result;
    for (auto& [mass, idx] : by_mass)
        for (size_t j = 0; j < idx.size(); ++j)
            (j % 4 == 3 ? result.val_indices : result.train_indices).push_back(idx[j]);

    std::mt19937_64 rng(config.seed);
    ForceModel model(config, rng);
    model.seed_ = config.seed;

    // feature standardization from the training split
    Eigen::Matrix<double, 7, 1> mean = Eigen::Matrix<double, 7, 1>::Zero();
    for (int i : result.train_indices) mean += dataset[i].scenario.feature_vector();
    mean /= static_cast<double>(result.train_indices.size());
    Eigen::Matrix<double, 7, 1> var = Eigen::Matrix<double, 7, 1>::Zero();
    for (int i : result.train_indices) {
        const Eigen::Matrix<double, 7, 1> d = dataset[i].scenario.feature_vector() - mean;
        var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(result.train_indices.size());
    model.feat_mean = mean;
    model.feat_std = var.cwiseSqrt().cwiseMax(1e-6);

    const Eigen::VectorXd times = grid_times(config);
    const int N = static_cast<int>(times.size());
    const Eigen::VectorXd trap = trapezoid_weights(N, config.grid_dt);

    struct Prepared {
        Eigen::Matrix<double, 7, 1> theta_std;
        Mat observed;      // N x 2 scaled
        double Px, Py, E;  // scaled targets
        Mat v_rel;         // N x 2 (unscaled velocities)
    };
    std::vector<Prepared> prep(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const ForceSample& s = dataset[i];
        Prepared& p = prep[i];
        p.theta_std = (s.scenario.feature_vector() - model.feat_mean)
                          .cwiseQuotient(model.feat_std);
        const ForceCurve res = resample(s.curve, config.grid_dt, config.dt_max);
        p.observed.resize(N, 2);
        for (int r = 0; r < N; ++r)
            p.observed.row(r) = (kForceScale * res.samples[r]).transpose();
        p.Px = s.solution.P_x * kForceScale;
        p.Py = s.solution.P_y * kForceScale;
        p.E = s.solution.E_dissipated * kForceScale;
        // decay the relative velocity across the observed pulse window
        const double span = std::max(s.curve.t_end - s.curve.t_start, config.grid_dt);
        const Eigen::Vector2d v0(s.scenario.v_bx - s.scenario.v_tx,
                                 s.scenario.v_by - s.scenario.v_ty);
        p.v_rel.resize(N, 2);
        for (int r = 0; r < N; ++r) {
            const double a = std::min(times(r) / span, 1.0);
            p.v_rel.row(r) = (v0 * (1.0 - a) - s.scenario.e * v0 * a).transpose();
        }
    }

    auto scenario_loss = [&](Tape& t, int idx, Var& physics_out) {
        const Prepared& p = prep[idx];
        const Forward f = run_forward(t, model.net_, config, p.theta_std, times);
        Var obs = t.constant(p.observed);

        // NLL of the observed curve under the time-varying mixture
        std::vector<Var> cols(config.K);
        for (int k = 0; k < config.K; ++k) {
            Var d = t.sub(obs, f.mu[k]);
            Var quad = t.row_sum(t.divide(t.square(d), f.var[k]));     // N x 1
            Var logdet = t.row_sum(t.log(f.var[k]));                   // N x 1
            Var logpi = t.log(t.slice_cols(f.pi, k, 1));
            Var logn = t.add(logpi, t.scale(t.add(quad, logdet), -0.5));
            cols[k] = t.add_scalar(logn, -kLog2Pi);
        }
        Var nll = t.scale(t.mean(t.logsumexp_rows(t.concat_cols(cols))), -1.0);

        // impulse loss on the mixture mean
        Var w = t.constant(Mat(trap));
        Var ix = t.sum(t.mul(w, t.slice_cols(f.mu_mean, 0, 1)));
        Var iy = t.sum(t.mul(w, t.slice_cols(f.mu_mean, 1, 1)));
        Var imp = t.add(t.square(t.add_scalar(ix, -p.Px)), t.square(t.add_scalar(iy, -p.Py)));
        imp = t.scale(imp, config.lambda_imp);

        // energy loss, work integral against the relative-velocity profile
        Var power = t.row_sum(t.mul(f.mu_mean, t.constant(p.v_rel)));
        Var work = t.sum(t.mul(w, power));
        Var eng = t.scale(t.square(t.add_scalar(work, -p.E)), config.lambda_eng);

        physics_out = t.add(imp, eng);
        return t.add(nll, physics_out);
    };

    nn::AdamOptimizer opt(config.lr);
    std::vector<int> order = result.train_indices;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_total = 0.0, phys_total = 0.0;
        for (size_t start = 0; start < order.size(); start += config.batch) {
            Tape t;
            model.net_.bind(t);
            Var batch_loss;
            int n = 0;
            for (size_t j = start; j < order.size() && j < start + config.batch; ++j, ++n) {
                Var phys;
                Var l = scenario_loss(t, order[j], phys);
                batch_loss = n == 0 ? l : t.add(batch_loss, l);
                phys_total += t.value(phys)(0, 0);
            }
            batch_loss = t.scale(batch_loss, 1.0 / n);
            const double lv = t.value(batch_loss)(0, 0);
            if (!std::isfinite(lv))
                throw Diverged("train_force_model: loss NaN at epoch " +
                               std::to_string(epoch) + " seed " + std::to_string(config.seed));
            train_total += lv * n;
            t.backward(batch_loss);
            opt.step(model.net_, t);
        }
        double val_total = 0.0;
        for (int i : result.val_indices) {
            Tape t;
            model.net_.bind(t);
            Var phys;
            val_total += t.value(scenario_loss(t, i, phys))(0, 0);
        }
        result.history.train_loss.push_back(train_total / result.train_indices.size());
        result.history.val_loss.push_back(
            result.val_indices.empty() ? 0.0 : val_total / result.val_indices.size());
        result.history.physics_loss.push_back(phys_total / result.train_indices.size());
    }

    model.trained_ = true;
    result.model = std::move(model);
    return result;
}

} // namespace pitdyn::fm
