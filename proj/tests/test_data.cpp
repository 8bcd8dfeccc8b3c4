#include <doctest.h>

#include <cmath>
#include <random>

#include "pitdyn/data.hpp"
#include "pitdyn/errors.hpp"

using namespace pitdyn;
namespace dt = pitdyn::data;

namespace {

dt::SurrogateConfig small_cfg(int scenarios, uint64_t seed) {
    dt::SurrogateConfig cfg;
    cfg.scenarios = scenarios;
    cfg.seed = seed;
    return cfg;
}

// y-dominant half-sine pulse used to plant cluster structure
ForceCurve halfsine_curve(double amplitude, double span = 0.1) {
    ForceCurve c;
    c.dt = 1e-3;
    c.t_start = 0.0;
    c.t_end = span;
    const int n = static_cast<int>(std::lround(span / c.dt)) + 1;
    for (int i = 0; i < n; ++i) {
        const double s = std::sin(M_PI * i * c.dt / span);
        c.samples.push_back({0.3 * amplitude * s, amplitude * s});
    }
    return c;
}

fm::ForceSample planted_sample(double amplitude, int id) {
    fm::ForceSample s;
    s.curve = halfsine_curve(amplitude);
    const Eigen::Vector2d P = impulse_from_force(s.curve);
    s.solution.P_x = P(0);
    s.solution.P_y = P(1);
    s.id = "planted" + std::to_string(id);
    return s;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST_CASE("surrogate dataset: every curve reproduces its impulse label") {
    const auto ds = dt::generate_force_dataset(small_cfg(12, 7));
    REQUIRE(ds.size() == 12);
    for (const auto& s : ds) {
        REQUIRE(!s.curve.empty());
        const Eigen::Vector2d P = impulse_from_force(s.curve);
        CHECK(std::abs(P(0) - s.solution.P_x) < 1e-9);
        CHECK(std::abs(P(1) - s.solution.P_y) < 1e-9);
        const double span = s.curve.t_end - s.curve.t_start;
        CHECK(span >= 0.05 - 1e-9);
        CHECK(span <= 0.15 + 1e-9);
    }
}

TEST_CASE("surrogate dataset: bullet masses cycle through the configured list") {
    const auto cfg = small_cfg(9, 3);
    const auto ds = dt::generate_force_dataset(cfg);
    for (size_t i = 0; i < ds.size(); ++i)
        CHECK(ds[i].scenario.m_b ==
              doctest::Approx(cfg.bullet_masses[i % cfg.bullet_masses.size()]));
}

TEST_CASE("surrogate dataset: side impulses dominate") {
    const auto ds = dt::generate_force_dataset(small_cfg(30, 11));
    std::vector<double> px, py;
    for (const auto& s : ds) {
        px.push_back(std::abs(s.solution.P_x));
        py.push_back(std::abs(s.solution.P_y));
    }
    CHECK(median_of(py) > median_of(px));
}

TEST_CASE("surrogate dataset: seed determinism") {
    const auto a = dt::generate_force_dataset(small_cfg(6, 21));
    const auto b = dt::generate_force_dataset(small_cfg(6, 21));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].solution.P_x == b[i].solution.P_x);
        CHECK(a[i].solution.P_y == b[i].solution.P_y);
        REQUIRE(a[i].curve.size() == b[i].curve.size());
        for (int j = 0; j < a[i].curve.size(); ++j)
            CHECK((a[i].curve.samples[j] - b[i].curve.samples[j]).norm() == 0.0);
    }
    const auto c = dt::generate_force_dataset(small_cfg(6, 22));
    bool differs = false;
    for (size_t i = 0; i < a.size() && !differs; ++i)
        differs = a[i].solution.P_y != c[i].solution.P_y;
    CHECK(differs);
}

TEST_CASE("surrogate config validation") {
    dt::SurrogateConfig cfg;
    cfg.scenarios = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.speed_min = 10.0;
    cfg.speed_max = 5.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.noise_scale = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.grid_dt = 0.2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(dt::SurrogateConfig{}.validate());
}

TEST_CASE("impulse projection: exact, idempotent, empty rejected") {
    ForceCurve c;
    c.dt = 1e-3;
    c.t_end = 0.1;
    for (int i = 0; i <= 100; ++i) c.samples.push_back({1000.0, -250.0});
    const Eigen::Vector2d target(120.0, -40.0);
    const ForceCurve p = dt::project_to_impulse(c, target);
    const Eigen::Vector2d got = impulse_from_force(p);
    CHECK(std::abs(got(0) - target(0)) < 1e-9);
    CHECK(std::abs(got(1) - target(1)) < 1e-9);

    const ForceCurve q = dt::project_to_impulse(p, target);
    for (int i = 0; i < p.size(); ++i)
        CHECK((q.samples[i] - p.samples[i]).norm() < 1e-10);

    CHECK_THROWS_AS(dt::project_to_impulse(ForceCurve{}, target), EmptyCurve);
}

TEST_CASE("pretrain trajectories: zero force keeps the vehicle on a straight line") {
    fm::ForceSample s;
    s.scenario.v_tx = 15.0;
    s.curve = halfsine_curve(0.0);
    s.solution = {};
    s.id = "coast";
    const auto set = dt::generate_pretrain_trajectories({s}, VehicleParams{}, 1.0);
    REQUIRE(set.size() == 1);
    const Trajectory& tr = set[0].traj;
    REQUIRE(tr.states.size() == 101);
    for (const auto& st : tr.states) {
        CHECK(std::abs(st.Y) < 1e-9);
        CHECK(std::abs(st.psi) < 1e-9);
    }
    // rolling resistance slows the vehicle down
    CHECK(tr.states.back().v_x < 15.0);
    CHECK(tr.states.back().v_x > 10.0);
    CHECK(tr.states.back().X > 10.0);
}

TEST_CASE("perturbed plant parameters scale the tire constants") {
    const VehicleParams base;
    const dt::PlantConfig plant;
    const VehicleParams p = dt::perturbed_params(base, plant);
    for (int i = 0; i < 4; ++i) CHECK(p.C[i] == doctest::Approx(0.8 * base.C[i]));
    CHECK(p.mu_s == doctest::Approx(0.85 * base.mu_s));
    CHECK(p.m == base.m);
}

TEST_CASE("plant simulation differs from the nominal model but stays finite") {
    const auto ds = dt::generate_force_dataset(small_cfg(2, 5));
    const VehicleParams params;
    const auto nominal = dt::generate_pretrain_trajectories(ds, params, 2.0);
    const auto plant = dt::generate_plant_trajectories(ds, params, dt::PlantConfig{}, 2.0);
    REQUIRE(plant.size() == nominal.size());
    for (size_t i = 0; i < plant.size(); ++i) {
        REQUIRE(plant[i].traj.states.size() == nominal[i].traj.states.size());
        for (const auto& st : plant[i].traj.states) {
            CHECK(std::isfinite(st.X));
            CHECK(std::isfinite(st.v_y));
        }
        const double gap = dt::mean_position_error(nominal[i].traj, plant[i].traj);
        CHECK(gap > 1e-3); // tire mismatch must be visible
        CHECK(gap < 50.0);
    }
}

TEST_CASE("pso recovers planted tire parameters") {
    VehicleParams truth;
    for (auto& c : truth.C) c = 6.0;
    truth.mu_s = 0.75;
    const auto ds = dt::generate_force_dataset(small_cfg(3, 13));
    const auto trajectories = dt::generate_pretrain_trajectories(ds, truth, 2.0);

    dt::PsoConfig pso;
    pso.swarm = 20;
    pso.iterations = 40;
    pso.seed = 3;
    const dt::PsoResult fit = dt::pso_fit_tires(trajectories, VehicleParams{}, pso);

    CHECK(std::abs(fit.C - 6.0) / 6.0 < 0.05);
    CHECK(std::abs(fit.mu_s - 0.75) / 0.75 < 0.05);
    CHECK(fit.objective < 0.05);
    REQUIRE(static_cast<int>(fit.convergence.size()) == pso.iterations);
    for (size_t i = 1; i < fit.convergence.size(); ++i)
        CHECK(fit.convergence[i] <= fit.convergence[i - 1] + 1e-12);

    const dt::PsoResult again = dt::pso_fit_tires(trajectories, VehicleParams{}, pso);
    CHECK(again.C == fit.C);
    CHECK(again.mu_s == fit.mu_s);

    CHECK_THROWS_AS(dt::pso_fit_tires({}, VehicleParams{}, pso), EmptyTrainingSet);
}

TEST_CASE("clustering: two planted severity groups are recovered") {
    fm::ForceDataset ds;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> jitter(0.98, 1.02);
    for (int i = 0; i < 12; ++i) ds.push_back(planted_sample(2e4 * jitter(rng), i));
    for (int i = 0; i < 12; ++i) ds.push_back(planted_sample(8e4 * jitter(rng), 12 + i));

    const dt::ClusterReport rep = dt::cluster_by_impulse(ds, 1);
    CHECK(rep.k == 2);
    REQUIRE(!rep.silhouette_per_k.empty());
    CHECK(rep.silhouette_per_k[0] > 0.8);
    for (double s : rep.silhouette_per_k) {
        CHECK(s >= -1.0 - 1e-12);
        CHECK(s <= 1.0 + 1e-12);
    }
    REQUIRE(rep.membership.size() == ds.size());
    // each planted group maps to a single label
    for (int i = 1; i < 12; ++i) CHECK(rep.membership[i] == rep.membership[0]);
    for (int i = 13; i < 24; ++i) CHECK(rep.membership[i] == rep.membership[12]);
    CHECK(rep.membership[0] != rep.membership[12]);
    REQUIRE(rep.feature_table.size() == ds.size());
    for (const auto& row : rep.feature_table) REQUIRE(row.size() == 6);

    // input order must not change the partition
    fm::ForceDataset reversed(ds.rbegin(), ds.rend());
    const dt::ClusterReport rev = dt::cluster_by_impulse(reversed, 1);
    REQUIRE(rev.membership.size() == ds.size());
    const size_t n = ds.size();
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            CHECK((rep.membership[i] == rep.membership[j]) ==
                  (rev.membership[n - 1 - i] == rev.membership[n - 1 - j]));
}

TEST_CASE("clustering: a tiny cluster is merged into its neighbor") {
    fm::ForceDataset ds;
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> jitter(0.97, 1.03);
    for (int i = 0; i < 39; ++i) ds.push_back(planted_sample(2e4 * jitter(rng), i));
    ds.push_back(planted_sample(9e4, 39));

    const dt::ClusterReport rep = dt::cluster_by_impulse(ds, 2);
    CHECK(!rep.merge_log.empty());
    CHECK(rep.k == 1);
    for (int m : rep.membership) CHECK(m == 0);
}

TEST_CASE("clustering: degenerate and undersized inputs rejected") {
    fm::ForceDataset tiny;
    for (int i = 0; i < 5; ++i) tiny.push_back(planted_sample(1e4, i));
    CHECK_THROWS_AS(dt::cluster_by_impulse(tiny, 1), ConfigError);

    fm::ForceDataset flat;
    for (int i = 0; i < 12; ++i) flat.push_back(planted_sample(1e4, i));
    CHECK_THROWS_AS(dt::cluster_by_impulse(flat, 1), DegenerateFeatures);
}

TEST_CASE("evaluation metrics: zero for identical, exact for a planted offset") {
    fm::ForceSample s;
    s.scenario.v_tx = 12.0;
    s.curve = halfsine_curve(3e4);
    const auto set = dt::generate_pretrain_trajectories({s}, VehicleParams{}, 1.0);
    const Trajectory& truth = set[0].traj;

    const dt::EvalMetrics zero = dt::evaluate({{truth, truth}});
    for (int c = 0; c < 5; ++c) {
        CHECK(zero.rmse_mean(c) == 0.0);
        CHECK(zero.rmse_std(c) == 0.0);
    }
    CHECK(zero.avg_error == 0.0);

    Trajectory shifted = truth;
    for (auto& st : shifted.states) st.X += 1.0;
    const dt::EvalMetrics off = dt::evaluate({{truth, shifted}});
    CHECK(off.rmse_mean(0) == doctest::Approx(1.0));
    for (int c = 1; c < 5; ++c) CHECK(off.rmse_mean(c) == 0.0);
    CHECK(off.avg_error == doctest::Approx(1.0));

    CHECK(dt::trajectory_rmse(truth, shifted, 0) ==
          dt::trajectory_rmse(shifted, truth, 0));
    CHECK_THROWS_AS(dt::evaluate({}), EmptyTrainingSet);
}

TEST_CASE("nn-only baseline trains without ever evaluating the physics loss") {
    const auto ds = dt::generate_force_dataset(small_cfg(2, 31));
    const auto set = dt::generate_pretrain_trajectories(ds, VehicleParams{}, 1.0);

    ap::ApinnConfig cfg;
    cfg.hidden = 16;
    cfg.pe_dim = 8;
    cfg.epochs_pretrain = 2;
    cfg.epochs_finetune = 0;
    cfg.windows_per_traj = 1;
    const ap::ApinnTrainResult res = dt::train_nn_only_baseline(set, cfg);
    CHECK(res.physics_evals == 0);
    CHECK(res.model.trained());
    CHECK(res.model.config().physics_enabled == false);
    CHECK(res.model.config().center_on_prior == false);
    CHECK(res.history.size() == 2);
    for (const auto& row : res.history) {
        CHECK(std::isfinite(row.train_loss));
        CHECK(row.physics_loss == 0.0);
    }
}
