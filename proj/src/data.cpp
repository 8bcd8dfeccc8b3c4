#include "pitdyn/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pitdyn/errors.hpp"

namespace pitdyn::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Normalized half-sine profile with unit integral over [0, span].
double unit_halfsine(double t, double span) {
    if (t < 0.0 || t > span) return 0.0;
    return kPi / (2.0 * span) * std::sin(kPi * t / span);
}

} // namespace

void SurrogateConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("SurrogateConfig: ") + what);
    };
    require(scenarios >= 1, "scenarios must be >= 1");
    require(target_mass > 0.0, "target_mass must be positive");
    require(!bullet_masses.empty(), "bullet_masses empty");
    for (double m : bullet_masses) require(m > 0.0, "bullet mass must be positive");
    require(speed_min > 0.0 && speed_max > speed_min, "bad speed range");
    require(target_speed_max >= 0.0, "bad target speed");
    require(pulse_min > 0.0 && pulse_max > pulse_min, "bad pulse range");
    require(noise_scale >= 0.0 && noise_scale < 1.0, "noise_scale out of [0, 1)");
    require(e >= 0.0 && e <= 1.0, "restitution out of [0, 1]");
    require(mu_max >= 0.0 && mu_max <= 1.5, "mu_max out of range");
    require(grid_dt > 0.0 && grid_dt < pulse_min, "grid_dt out of range");
}

ForceCurve project_to_impulse(const ForceCurve& curve, const Eigen::Vector2d& target) {
    if (curve.empty()) throw EmptyCurve("project_to_impulse: empty curve");
    const Eigen::Vector2d err = target - impulse_from_force(curve);
    const double span = curve.t_end - curve.t_start;
    // normalize the profile by its own trapezoid integral on this grid so the
    // corrected integral hits the target exactly, not just to O(dt^2)
    std::vector<double> w(curve.size());
    double wint = 0.0;
    for (int i = 0; i < curve.size(); ++i) {
        w[i] = unit_halfsine(i * curve.dt, span);
        if (i > 0) wint += 0.5 * curve.dt * (w[i] + w[i - 1]);
    }
    if (wint <= 0.0) throw EmptyCurve("project_to_impulse: degenerate grid");
    ForceCurve out = curve;
    for (int i = 0; i < out.size(); ++i) out.samples[i] += err * (w[i] / wint);
    return out;
}

fm::ForceDataset generate_force_dataset(const SurrogateConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);

    fm::ForceDataset dataset;
    dataset.reserve(cfg.scenarios);
    int attempts = 0;
    while (static_cast<int>(dataset.size()) < cfg.scenarios) {
        if (++attempts > 50 * cfg.scenarios)
            throw ConfigError("generate_force_dataset: sampling failed to close contacts");
        CollisionScenario s;
        s.m_t = cfg.target_mass;
        s.m_b = cfg.bullet_masses[dataset.size() % cfg.bullet_masses.size()];
        s.I_zzt = 1.6 * s.m_t;
        s.I_zzb = 1.6 * s.m_b;
        s.e = cfg.e;
        // side-impact dominant geometry: the contact surface stays near the
        // target's longitudinal axis, so the normal points near +Y.  The
        // contact configuration is kept a deterministic function of the
        // network-observable scenario features (masses, velocities, theta_b)
        // so the force labels are learnable from them.
        s.Gamma = cfg.angle_min + (cfg.angle_max - cfg.angle_min) * u01(rng);
        s.mu = cfg.mu_max * std::sin(s.Gamma);
        s.d_t = 0.9;
        s.d_b = 1.2;
        s.theta_t = s.Gamma + kPi / 2.0 + 0.2 * sym(rng);
        s.theta_b = s.Gamma - kPi / 2.0;
        s.v_tx = cfg.target_speed_max * u01(rng);
        s.v_ty = 0.0;
        const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * u01(rng);
        const Eigen::Vector2d n = s.normal();
        s.v_bx = s.v_tx + speed * n(0) + 0.5 * sym(rng);
        s.v_by = s.v_ty + speed * n(1) + 0.5 * sym(rng);

        ImpulseSolution sol;
        try {
            sol = solve_impulse(s);
        } catch (const ModelError&) {
            continue;
        }

        const double span = cfg.pulse_min + (cfg.pulse_max - cfg.pulse_min) * u01(rng);
        ForceCurve curve;
        curve.dt = cfg.grid_dt;
        curve.t_start = 0.0;
        curve.t_end = span;
        const int samples = static_cast<int>(std::lround(span / cfg.grid_dt)) + 1;
        const Eigen::Vector2d P(sol.P_x, sol.P_y);
        // band-limited multiplicative noise: low-order sinusoid mix
        std::array<double, 3> ax{}, px{}, ay{}, py{};
        for (int h = 0; h < 3; ++h) {
            ax[h] = sym(rng);
            px[h] = kPi * sym(rng);
            ay[h] = sym(rng);
            py[h] = kPi * sym(rng);
        }
        const double anorm = std::abs(ax[0]) + std::abs(ax[1]) + std::abs(ax[2]) + 1e-12;
        const double bnorm = std::abs(ay[0]) + std::abs(ay[1]) + std::abs(ay[2]) + 1e-12;
        for (int i = 0; i < samples; ++i) {
            const double t = i * cfg.grid_dt;
            const double base = unit_halfsine(t, span);
            double nx = 0.0, ny = 0.0;
            for (int h = 0; h < 3; ++h) {
                nx += ax[h] * std::sin(2.0 * kPi * (h + 1) * t / span + px[h]);
                ny += ay[h] * std::sin(2.0 * kPi * (h + 1) * t / span + py[h]);
            }
            nx *= cfg.noise_scale / anorm;
            ny *= cfg.noise_scale / bnorm;
            curve.samples.push_back(
                {P(0) * base * (1.0 + nx), P(1) * base * (1.0 + ny)});
        }
        curve = project_to_impulse(curve, P);

        fm::ForceSample sample;
        sample.scenario = s;
        sample.solution = sol;
        sample.curve = curve;
        sample.id = "case" + std::to_string(dataset.size());
        dataset.push_back(std::move(sample));
    }
    return dataset;
}

ap::TrajectoryDataset generate_pretrain_trajectories(const fm::ForceDataset& dataset,
                                                     const VehicleParams& params,
                                                     double horizon) {
    ap::TrajectoryDataset out;
    out.reserve(dataset.size());
    for (const auto& s : dataset) {
        VehicleState initial;
        initial.v_x = s.scenario.v_tx;
        initial.v_y = s.scenario.v_ty;
        initial.psi_dot = s.scenario.psi_dot_t;
        ap::TrajectorySample ts;
        ts.app = ForceApplication{0.0, 0.0, 0.5};
        ts.params = params;
        ts.force = s.curve;
        ts.id = s.id;
        try {
            ts.traj = integrate(initial, params, nullptr, &s.curve, ts.app, horizon);
        } catch (const IntegrationDiverged& ex) {
            throw IntegrationDiverged(std::string(ex.what()) + " (scenario " + s.id + ")");
        }
        out.push_back(std::move(ts));
    }
    return out;
}

VehicleParams perturbed_params(const VehicleParams& base, const PlantConfig& plant) {
    VehicleParams p = base;
    for (auto& c : p.C) c *= plant.c_scale;
    p.mu_s *= plant.mu_scale;
    return p;
}

Trajectory simulate_plant(const VehicleState& initial, const VehicleParams& base,
                          const PlantConfig& plant, const ForceCurve& force,
                          const ForceApplication& app, double horizon) {
    const VehicleParams pp = perturbed_params(base, plant);
    const double h = 1e-3;
    const double out_dt = 0.01;
    const int steps = static_cast<int>(std::lround(horizon / h));
    const int stride = static_cast<int>(std::lround(out_dt / h));

    // augmented state: vehicle 8-state plus first-order-lagged lateral forces
    struct Aug {
        VehicleState s;
        Eigen::Vector4d lag;
    };
    auto deriv = [&](const Aug& a, double t, Eigen::Matrix<double, 8, 1>& ds,
                     Eigen::Vector4d& dlag) {
        const TireForces tf = tire_forces(a.s, pp, 0.0, true);
        const double fx = tf.F_x[0] + tf.F_x[1] + tf.F_x[2] + tf.F_x[3];
        const double fy = a.lag.sum();
        const double mz = pp.l_f * (a.lag(0) + a.lag(1)) - pp.l_r * (a.lag(2) + a.lag(3)) +
                          0.5 * pp.t_w * (tf.F_x[1] - tf.F_x[0] + tf.F_x[3] - tf.F_x[2]);
        const PlanarForce bf = body_force_from_ground(force.at(t), a.s.psi, app, pp);
        const double vxd = a.s.v_y * a.s.psi_dot + (fx + bf.F_x) / pp.m;
        const double vyd = -a.s.v_x * a.s.psi_dot + (fy + bf.F_y) / pp.m;
        const double rhs_yaw = mz + bf.M_z;
        const double rhs_roll = pp.m_s * pp.g * pp.h_rc * std::sin(a.s.phi) -
                                pp.K_s * a.s.phi - pp.B_s * a.s.phi_dot + bf.M_x;
        const double psidd = rhs_yaw / pp.I_zz;
        const double phidd = (rhs_roll - pp.I_xz * psidd) / pp.I_xx_s;
        ds << vxd, vyd, a.s.psi_dot, psidd, a.s.phi_dot, phidd,
            a.s.v_x * std::cos(a.s.psi) - a.s.v_y * std::sin(a.s.psi),
            a.s.v_x * std::sin(a.s.psi) + a.s.v_y * std::cos(a.s.psi);
        for (int i = 0; i < 4; ++i) dlag(i) = (tf.F_y[i] - a.lag(i)) / plant.lag_tau;
    };
    auto advance = [](const Aug& a, const Eigen::Matrix<double, 8, 1>& ds,
                      const Eigen::Vector4d& dlag, double step) {
        Aug b = a;
        b.s.v_x += ds(0) * step;
        b.s.v_y += ds(1) * step;
        b.s.psi += ds(2) * step;
        b.s.psi_dot += ds(3) * step;
        b.s.phi += ds(4) * step;
        b.s.phi_dot += ds(5) * step;
        b.s.X += ds(6) * step;
        b.s.Y += ds(7) * step;
        b.lag += dlag * step;
        return b;
    };

    Aug a;
    a.s = initial;
    {
        const TireForces tf0 = tire_forces(a.s, pp, 0.0, true);
        for (int i = 0; i < 4; ++i) a.lag(i) = tf0.F_y[i];
    }

    Trajectory traj;
    traj.t.push_back(0.0);
    traj.states.push_back(a.s);
    Eigen::Matrix<double, 8, 1> k1, k2, k3, k4;
    Eigen::Vector4d l1, l2, l3, l4;
    for (int i = 0; i < steps; ++i) {
        const double t = i * h;
        deriv(a, t, k1, l1);
        a.s.a_x = k1(0) - a.s.v_y * a.s.psi_dot;
        a.s.a_y = k1(1) + a.s.v_x * a.s.psi_dot;
        deriv(advance(a, k1, l1, 0.5 * h), t + 0.5 * h, k2, l2);
        deriv(advance(a, k2, l2, 0.5 * h), t + 0.5 * h, k3, l3);
        deriv(advance(a, k3, l3, h), t + h, k4, l4);
        a = advance(a, Eigen::Matrix<double, 8, 1>((k1 + 2 * k2 + 2 * k3 + k4) / 6.0),
                    Eigen::Vector4d((l1 + 2 * l2 + 2 * l3 + l4) / 6.0), h);
        if (std::hypot(a.s.v_x, a.s.v_y) > 150.0 || std::abs(a.s.psi_dot) > 50.0)
            throw IntegrationDiverged("simulate_plant: state guard tripped");
        if ((i + 1) % stride == 0) {
            traj.t.push_back((i + 1) * h);
            traj.states.push_back(a.s);
        }
    }
    return traj;
}

ap::TrajectoryDataset generate_plant_trajectories(const fm::ForceDataset& dataset,
                                                  const VehicleParams& params,
                                                  const PlantConfig& plant, double horizon) {
    ap::TrajectoryDataset out;
    out.reserve(dataset.size());
    for (const auto& s : dataset) {
        VehicleState initial;
        initial.v_x = s.scenario.v_tx;
        initial.v_y = s.scenario.v_ty;
        initial.psi_dot = s.scenario.psi_dot_t;
        ap::TrajectorySample ts;
        ts.app = ForceApplication{0.0, 0.0, 0.5};
        ts.params = params; // nominal parameters as the model's belief
        ts.force = s.curve;
        ts.id = s.id;
        ts.traj = simulate_plant(initial, params, plant, s.curve, ts.app, horizon);
        out.push_back(std::move(ts));
    }
    return out;
}

PsoResult pso_fit_tires(const ap::TrajectoryDataset& trajectories,
                        const VehicleParams& base_params, const PsoConfig& config) {
    if (trajectories.empty()) throw EmptyTrainingSet("pso_fit_tires: no trajectories");
    const double c_lo = 3.0, c_hi = 14.0, mu_lo = 0.4, mu_hi = 1.3;

    // keep the objective cheap: a bounded number of shortened rollouts
    const int use_traj = std::min<int>(3, static_cast<int>(trajectories.size()));
    const double horizon = 2.0;
    SimOptions fast;
    fast.substep_dt = 2e-3;

    auto objective = [&](double c, double mu) {
        VehicleParams p = base_params;
        for (auto& ci : p.C) ci = c;
        p.mu_s = mu;
        double total = 0.0;
        int n = 0;
        for (int i = 0; i < use_traj; ++i) {
            const auto& ts = trajectories[i];
            VehicleState initial = ts.traj.states.front();
            Trajectory sim;
            try {
                sim = integrate(initial, p, nullptr, &ts.force, ts.app,
                                std::min(horizon, ts.traj.t.back()), fast);
            } catch (const ModelError&) {
                return 1e9;
            }
            const size_t len = std::min(sim.states.size(), ts.traj.states.size());
            for (size_t j = 0; j < len; ++j) {
                const auto& A = sim.states[j];
                const auto& B = ts.traj.states[j];
                total += (A.X - B.X) * (A.X - B.X) + (A.Y - B.Y) * (A.Y - B.Y);
                ++n;
            }
        }
        return std::sqrt(total / std::max(n, 1));
    };

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    struct Particle {
        Eigen::Vector2d x, v, best_x;
        double best = 1e18;
    };
    std::vector<Particle> swarm(config.swarm);
    Eigen::Vector2d gbest_x(0.5 * (c_lo + c_hi), 0.5 * (mu_lo + mu_hi));
    double gbest = 1e18;
    for (auto& p : swarm) {
        p.x = {c_lo + (c_hi - c_lo) * u01(rng), mu_lo + (mu_hi - mu_lo) * u01(rng)};
        p.v = {0.1 * (c_hi - c_lo) * (u01(rng) - 0.5), 0.1 * (mu_hi - mu_lo) * (u01(rng) - 0.5)};
        p.best_x = p.x;
        p.best = objective(p.x(0), p.x(1));
        if (p.best < gbest) {
            gbest = p.best;
            gbest_x = p.x;
        }
    }

    PsoResult result;
    for (int it = 0; it < config.iterations; ++it) {
        for (auto& p : swarm) {
            const Eigen::Vector2d r1(u01(rng), u01(rng)), r2(u01(rng), u01(rng));
            p.v = config.inertia * p.v +
                  config.cognitive * r1.cwiseProduct(p.best_x - p.x) +
                  config.social * r2.cwiseProduct(gbest_x - p.x);
            p.x += p.v;
            p.x(0) = std::clamp(p.x(0), c_lo, c_hi);
            p.x(1) = std::clamp(p.x(1), mu_lo, mu_hi);
            const double f = objective(p.x(0), p.x(1));
            if (f < p.best) {
                p.best = f;
                p.best_x = p.x;
            }
            if (f < gbest) {
                gbest = f;
                gbest_x = p.x;
            }
        }
        result.convergence.push_back(gbest);
    }
    result.C = gbest_x(0);
    result.mu_s = gbest_x(1);
    result.objective = gbest;
    return result;
}

namespace {

double silhouette(const std::vector<Eigen::Vector4d>& pts, const std::vector<int>& member,
                  int k) {
    const int n = static_cast<int>(pts.size());
    double total = 0.0;
    int counted = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> dist_sum(k, 0.0);
        std::vector<int> count(k, 0);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sum[member[j]] += (pts[i] - pts[j]).norm();
            ++count[member[j]];
        }
        const int mi = member[i];
        if (count[mi] == 0) continue; // singleton cluster
        const double a = dist_sum[mi] / count[mi];
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != mi && count[c] > 0) b = std::min(b, dist_sum[c] / count[c]);
        if (!std::isfinite(b)) continue;
        total += (b - a) / std::max(a, b);
        ++counted;
    }
    return counted > 0 ? total / counted : -1.0;
}

struct KmeansRun {
    std::vector<int> member;
    std::vector<Eigen::Vector4d> centroids;
    double inertia = 1e18;
};

KmeansRun kmeans(const std::vector<Eigen::Vector4d>& pts, int k, int inits, int iters,
                 std::mt19937_64& rng) {
    const int n = static_cast<int>(pts.size());
    KmeansRun best;
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int init = 0; init < inits; ++init) {
        std::vector<Eigen::Vector4d> c(k);
        for (int j = 0; j < k; ++j) c[j] = pts[pick(rng)];
        std::vector<int> member(n, 0);
        for (int iter = 0; iter < iters; ++iter) {
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                int bj = 0;
                double bd = (pts[i] - c[0]).squaredNorm();
                for (int j = 1; j < k; ++j) {
                    const double d = (pts[i] - c[j]).squaredNorm();
                    if (d < bd) {
                        bd = d;
                        bj = j;
                    }
                }
                if (member[i] != bj) {
                    member[i] = bj;
                    changed = true;
                }
            }
            for (int j = 0; j < k; ++j) {
                Eigen::Vector4d sum = Eigen::Vector4d::Zero();
                int cnt = 0;
                for (int i = 0; i < n; ++i)
                    if (member[i] == j) {
                        sum += pts[i];
                        ++cnt;
                    }
                if (cnt > 0) c[j] = sum / cnt;
            }
            if (!changed) break;
        }
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) inertia += (pts[i] - c[member[i]]).squaredNorm();
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.member = member;
            best.centroids = c;
        }
    }
    return best;
}

} // namespace

ClusterReport cluster_by_impulse(const fm::ForceDataset& dataset, uint64_t seed) {
    const int n = static_cast<int>(dataset.size());
    if (n < 10) throw ConfigError("cluster_by_impulse: need at least 10 cases");

    ClusterReport report;
    std::vector<Eigen::Vector4d> raw(n);
    for (int i = 0; i < n; ++i) {
        const ForceCurve& c = dataset[i].curve;
        const Eigen::Vector2d P = impulse_from_force(c);
        const double itot = total_impulse_magnitude(c);
        double fmax = 0.0, fsum = 0.0, fsq = 0.0;
        for (const auto& s : c.samples) {
            const double m = s.norm();
            fmax = std::max(fmax, m);
            fsum += m;
            fsq += m * m;
        }
        const double fmean = fsum / c.size();
        const double fstd = std::sqrt(std::max(fsq / c.size() - fmean * fmean, 0.0));
        raw[i] = {P(0), P(1), itot, fmax};
        report.feature_table.push_back({P(0), P(1), itot, fmax, fmean, fstd});
    }

    Eigen::Vector4d mean = Eigen::Vector4d::Zero(), var = Eigen::Vector4d::Zero();
    for (const auto& p : raw) mean += p;
    mean /= n;
    for (const auto& p : raw) var += (p - mean).cwiseProduct(p - mean);
    var /= n;
    if (var.maxCoeff() < 1e-18)
        throw DegenerateFeatures("cluster_by_impulse: all feature vectors identical");
    const Eigen::Vector4d stdev = var.cwiseSqrt().cwiseMax(1e-9);
    std::vector<Eigen::Vector4d> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = (raw[i] - mean).cwiseQuotient(stdev);

    // run k-means on lexicographically sorted points so the partition is
    // invariant to input order, then map memberships back
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::lexicographical_compare(pts[a].data(), pts[a].data() + 4, pts[b].data(),
                                            pts[b].data() + 4);
    });
    std::vector<Eigen::Vector4d> sorted(n);
    for (int i = 0; i < n; ++i) sorted[i] = pts[order[i]];

    std::mt19937_64 rng(seed);
    int best_k = 2;
    double best_sil = -2.0;
    KmeansRun best_run;
    const int k_max = std::min(8, n - 1);
    for (int k = 2; k <= k_max; ++k) {
        KmeansRun run = kmeans(sorted, k, 20, 500, rng);
        const double sil = silhouette(sorted, run.member, k);
        report.silhouette_per_k.push_back(sil);
        if (sil > best_sil) {
            best_sil = sil;
            best_k = k;
            best_run = run;
        }
    }
    {
        std::vector<Eigen::Vector4d> recomputed(best_k, Eigen::Vector4d::Zero());
        std::vector<int> cnt(best_k, 0);
        for (int i = 0; i < n; ++i) {
            recomputed[best_run.member[i]] += sorted[i];
            ++cnt[best_run.member[i]];
        }
        for (int j = 0; j < best_k; ++j)
            if (cnt[j] > 0) best_run.centroids[j] = recomputed[j] / cnt[j];
        std::vector<int> unsorted(n);
        for (int i = 0; i < n; ++i) unsorted[order[i]] = best_run.member[i];
        best_run.member = unsorted;
    }

    // merge clusters holding <= 5% of the cases into the nearest centroid
    std::vector<int> count(best_k, 0);
    for (int m : best_run.member) ++count[m];
    const double min_share = 0.05;
    bool merged = true;
    while (merged) {
        merged = false;
        int active = 0;
        for (int j = 0; j < best_k; ++j) active += count[j] > 0 ? 1 : 0;
        if (active <= 1) break;
        for (int j = 0; j < best_k && !merged; ++j) {
            if (count[j] == 0 || count[j] > min_share * n) continue;
            int nearest = -1;
            double nd = std::numeric_limits<double>::infinity();
            for (int m = 0; m < best_k; ++m) {
                if (m == j || count[m] == 0) continue;
                const double d = (best_run.centroids[j] - best_run.centroids[m]).norm();
                if (d < nd) {
                    nd = d;
                    nearest = m;
                }
            }
            if (nearest < 0) break;
            for (int i = 0; i < n; ++i)
                if (best_run.member[i] == j) best_run.member[i] = nearest;
            count[nearest] += count[j];
            count[j] = 0;
            report.merge_log.push_back("merged cluster " + std::to_string(j) + " (" +
                                       std::to_string(count[nearest]) +
                                       " after merge) into " + std::to_string(nearest));
            merged = true;
        }
    }

    // compact labels
    std::vector<int> relabel(best_k, -1);
    int next = 0;
    for (int j = 0; j < best_k; ++j)
        if (count[j] > 0) relabel[j] = next++;
    for (int& m : best_run.member) m = relabel[m];
    report.k = next;
    report.membership = best_run.member;
    for (int j = 0; j < best_k; ++j)
        if (count[j] > 0) report.centroids.push_back(best_run.centroids[j]);
    return report;
}

double trajectory_rmse(const Trajectory& a, const Trajectory& b, int component) {
    const size_t len = std::min(a.states.size(), b.states.size());
    if (len == 0) throw DimMismatch("trajectory_rmse: empty trajectory");
    auto get = [component](const VehicleState& s) {
        switch (component) {
            case 0: return s.X;
            case 1: return s.Y;
            case 2: return s.v_x;
            case 3: return s.v_y;
            default: return s.psi_dot;
        }
    };
    double total = 0.0;
    for (size_t i = 0; i < len; ++i) {
        const double d = get(a.states[i]) - get(b.states[i]);
        total += d * d;
    }
    return std::sqrt(total / len);
}

double mean_position_error(const Trajectory& truth, const Trajectory& pred) {
    const size_t len = std::min(truth.states.size(), pred.states.size());
    if (len == 0) throw DimMismatch("mean_position_error: empty trajectory");
    double total = 0.0;
    for (size_t i = 0; i < len; ++i)
        total += std::hypot(truth.states[i].X - pred.states[i].X,
                            truth.states[i].Y - pred.states[i].Y);
    return total / len;
}

EvalMetrics evaluate(const std::vector<EvalCase>& cases) {
    if (cases.empty()) throw EmptyTrainingSet("evaluate: empty test set");
    EvalMetrics m;
    Eigen::Matrix<double, 5, Eigen::Dynamic> rmse(5, cases.size());
    double err_total = 0.0;
    for (size_t i = 0; i < cases.size(); ++i) {
        for (int c = 0; c < 5; ++c)
            rmse(c, i) = trajectory_rmse(cases[i].truth, cases[i].prediction, c);
        err_total += mean_position_error(cases[i].truth, cases[i].prediction);
    }
    m.rmse_mean = rmse.rowwise().mean();
    for (int c = 0; c < 5; ++c) {
        double v = 0.0;
        for (int i = 0; i < rmse.cols(); ++i)
            v += (rmse(c, i) - m.rmse_mean(c)) * (rmse(c, i) - m.rmse_mean(c));
        m.rmse_std(c) = std::sqrt(v / rmse.cols());
    }
    m.avg_error = err_total / cases.size();
    return m;
}

ap::ApinnTrainResult train_nn_only_baseline(const ap::TrajectoryDataset& dataset,
                                            ap::ApinnConfig config) {
    config.physics_enabled = false;
    config.center_on_prior = false;
    ap::ApinnTrainResult result = ap::train_apinn(dataset, {}, config);
    if (result.physics_evals != 0)
        throw ModelError("train_nn_only_baseline: physics loss was evaluated");
    return result;
}

} // namespace pitdyn::data
