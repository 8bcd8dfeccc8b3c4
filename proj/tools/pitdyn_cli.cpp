// pitdyn command-line front end: dataset generation, training, prediction
// with uncertainty export, clustering and evaluation reports.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "pitdyn/apinn.hpp"
#include "pitdyn/data.hpp"
#include "pitdyn/errors.hpp"
#include "pitdyn/force_model.hpp"
#include "pitdyn/io.hpp"
#include "pitdyn/unscented.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pitdyn;

namespace {

// exit-code map: 0 ok, 2 config, 3 datagen, 4 training, 5 inference,
// 6 missing input
struct MissingInput : std::runtime_error {
    explicit MissingInput(const std::string& msg) : std::runtime_error(msg) {}
};

std::string resolve_out(const std::string& out) {
    if (!out.empty() && out.front() == '/') return out;
    if (const char* root = std::getenv("PITDYN_OUT_ROOT"))
        return (fs::path(root) / out).string();
    return out;
}

void require_exists(const std::string& path) {
    if (!fs::exists(path)) throw MissingInput("missing input: " + path);
}

uint64_t file_hash(const std::string& path) { return io::fnv1a(io::read_file(path)); }

void write_snapshot(const std::string& out_dir, const json& resolved) {
    io::write_file((fs::path(out_dir) / "config.json").string(), resolved.dump(2) + "\n");
}

uint64_t config_hash(const json& resolved) { return io::fnv1a(resolved.dump()); }

fm::ForceDataset load_dataset(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    require_exists(manifest_path);
    const json manifest = json::parse(io::read_file(manifest_path));
    fm::ForceDataset dataset;
    for (const auto& c : manifest.at("cases")) {
        fm::ForceSample s;
        s.id = c.at("id").get<std::string>();
        const std::string sc = (fs::path(dir) / c.at("scenario").get<std::string>()).string();
        const std::string fc = (fs::path(dir) / c.at("force").get<std::string>()).string();
        require_exists(sc);
        require_exists(fc);
        s.scenario = io::scenario_from_json(io::read_file(sc));
        s.curve = io::read_force_csv(fc);
        s.solution = solve_impulse(s.scenario);
        dataset.push_back(std::move(s));
    }
    return dataset;
}

void write_gmm_bands(const std::string& path, const Trajectory& traj,
                     const std::vector<StateGmm>& gmms, double dt) {
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i + 1 < traj.states.size() && i < gmms.size(); ++i) {
        const VehicleState& s = traj.states[i];
        const ut::TrajectoryGmm g = ut::trajectory_gmm(gmms[i], s.X, s.Y, s.psi, dt);
        Eigen::Vector2d mean = g.mean();
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (int j = 0; j < g.components(); ++j) {
            const Eigen::Vector2d d = g.means[j] - mean;
            cov += g.weights[j] * (g.covs[j] + d * d.transpose());
        }
        rows.push_back({traj.t[i + 1], mean(0), mean(1), std::sqrt(cov(0, 0)),
                        std::sqrt(cov(1, 1))});
    }
    io::write_table_csv(path, "t,mean_X,mean_Y,sigma_X,sigma_Y", rows);
}

void write_density(const std::string& path, const ut::DensityGrid& grid) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < grid.xs.size(); ++i)
        for (int j = 0; j < grid.ys.size(); ++j)
            rows.push_back({grid.xs(i), grid.ys(j), grid.density(i, j)});
    io::write_table_csv(path, "X,Y,density", rows);
}

int run_gen_data(const data::SurrogateConfig& cfg, const std::string& out_raw) {
    const std::string out = resolve_out(out_raw);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        fs::create_directories(fs::path(out) / "cases");
        const fm::ForceDataset dataset = data::generate_force_dataset(cfg);
        json resolved = {{"command", "gen-data"},
                         {"scenarios", cfg.scenarios},
                         {"seed", cfg.seed},
                         {"target_mass", cfg.target_mass},
                         {"bullet_masses", cfg.bullet_masses},
                         {"speed_min", cfg.speed_min},
                         {"speed_max", cfg.speed_max},
                         {"pulse_min", cfg.pulse_min},
                         {"pulse_max", cfg.pulse_max},
                         {"noise_scale", cfg.noise_scale},
                         {"e", cfg.e},
                         {"mu_max", cfg.mu_max},
                         {"grid_dt", cfg.grid_dt}};
        write_snapshot(out, resolved);
        json cases = json::array();
        for (const auto& s : dataset) {
            const std::string sc_rel = "cases/" + s.id + ".json";
            const std::string fc_rel = "cases/" + s.id + ".csv";
            io::write_file((fs::path(out) / sc_rel).string(),
                           io::scenario_to_json(s.scenario));
            io::write_force_csv((fs::path(out) / fc_rel).string(), s.curve);
            cases.push_back({{"id", s.id},
                             {"scenario", sc_rel},
                             {"force", fc_rel},
                             {"scenario_hash", file_hash((fs::path(out) / sc_rel).string())},
                             {"force_hash", file_hash((fs::path(out) / fc_rel).string())}});
        }
        json manifest = {{"seed", cfg.seed},
                         {"config_hash", config_hash(resolved)},
                         {"scenarios", cfg.scenarios},
                         {"cases", cases}};
        io::write_file((fs::path(out) / "manifest.json").string(), manifest.dump(2) + "\n");
        return 0;
    } catch (const ModelError& e) {
        std::cerr << "generation failed: " << e.what() << "\n";
        return 3;
    }
}

int run_train_force(const std::string& data_dir, const std::string& out_raw,
                    fm::ForceModelConfig cfg) {
    const std::string out = resolve_out(out_raw);
    try {
        cfg.validate();
        fs::create_directories(out);
        const fm::ForceDataset dataset = load_dataset(data_dir);
        json resolved = {{"command", "train-force"}, {"seed", cfg.seed},
                         {"epochs", cfg.epochs},     {"hidden", cfg.hidden},
                         {"K", cfg.K},               {"lr", cfg.lr},
                         {"batch", cfg.batch},       {"data", data_dir}};
        write_snapshot(out, resolved);
        fm::ForceTrainResult result = fm::train_force_model(dataset, cfg);
        result.model.save((fs::path(out) / "force.ckpt").string());
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < result.history.train_loss.size(); ++i) {
            const double train = result.history.train_loss[i];
            const double phys = result.history.physics_loss[i];
            const double denom = std::abs(train) + std::abs(phys);
            rows.push_back({static_cast<double>(i), train, result.history.val_loss[i], phys,
                            denom > 0.0 ? train / denom : 0.5});
        }
        io::write_table_csv((fs::path(out) / "history.csv").string(),
                            "epoch,train_loss,val_loss,physics_loss,balance_ratio", rows);
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 4;
    }
}

void write_apinn_outputs(const std::string& out, ap::ApinnTrainResult& result) {
    result.model.save((fs::path(out) / "apinn.ckpt").string());
    std::vector<std::vector<double>> rows;
    for (const auto& r : result.history)
        rows.push_back({static_cast<double>(r.epoch), r.train_loss, r.val_loss,
                        r.physics_loss, r.balance});
    io::write_table_csv((fs::path(out) / "history.csv").string(),
                        "epoch,train_loss,val_loss,physics_loss,balance_ratio", rows);
}

int run_train_dynamics(const std::string& data_dir, const std::string& out_raw,
                       ap::ApinnConfig cfg, double horizon, int limit, bool nn_only) {
    const std::string out = resolve_out(out_raw);
    try {
        cfg.validate();
        fs::create_directories(out);
        fm::ForceDataset dataset = load_dataset(data_dir);
        if (limit > 0 && limit < static_cast<int>(dataset.size())) dataset.resize(limit);
        const VehicleParams params;
        const ap::TrajectoryDataset pretrain =
            data::generate_pretrain_trajectories(dataset, params, horizon);
        json resolved = {{"command", "train-dynamics"},
                         {"seed", cfg.seed},
                         {"epochs", cfg.epochs_pretrain},
                         {"hidden", cfg.hidden},
                         {"J", cfg.J},
                         {"horizon", horizon},
                         {"nn_only", nn_only},
                         {"data", data_dir}};
        write_snapshot(out, resolved);
        ap::ApinnTrainResult result =
            nn_only ? data::train_nn_only_baseline(pretrain, cfg)
                    : ap::train_apinn(pretrain, {}, cfg);
        write_apinn_outputs(out, result);
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 4;
    }
}

int run_finetune(const std::string& checkpoint, const std::string& data_dir,
                 const std::string& out_raw, int trajectories, int epochs,
                 double freeze_ratio, int hidden_override, double horizon) {
    const std::string out = resolve_out(out_raw);
    try {
        require_exists(checkpoint);
        fs::create_directories(out);
        const ap::ApinnModel prior = ap::ApinnModel::load(checkpoint);
        ap::ApinnConfig cfg = prior.config();
        if (hidden_override > 0 && hidden_override != cfg.hidden)
            throw ConfigError("architecture hash mismatch: checkpoint hidden=" +
                              std::to_string(cfg.hidden) + ", requested hidden=" +
                              std::to_string(hidden_override));
        cfg.freeze_ratio = freeze_ratio;
        if (epochs > 0) cfg.epochs_finetune = epochs;
        cfg.validate();

        fm::ForceDataset dataset = load_dataset(data_dir);
        const VehicleParams params;
        const ap::TrajectoryDataset pretrain =
            data::generate_pretrain_trajectories(dataset, params, horizon);
        if (trajectories > 0 && trajectories < static_cast<int>(dataset.size()))
            dataset.resize(trajectories);
        const data::PlantConfig plant;
        const ap::TrajectoryDataset finetune =
            data::generate_plant_trajectories(dataset, params, plant, horizon);

        json resolved = {{"command", "finetune"},    {"seed", cfg.seed},
                         {"epochs", cfg.epochs_finetune}, {"freeze_ratio", freeze_ratio},
                         {"trajectories", trajectories},  {"horizon", horizon},
                         {"checkpoint", checkpoint},      {"data", data_dir}};
        write_snapshot(out, resolved);
        ap::ApinnTrainResult result = ap::train_apinn(pretrain, finetune, cfg);
        write_apinn_outputs(out, result);
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 4;
    }
}

int run_predict(const std::string& scenario_path, const std::string& force_ckpt,
                const std::string& dyn_ckpt, const std::string& force_csv,
                const std::string& model_kind, const std::string& out_raw, double pulse) {
    const std::string out = resolve_out(out_raw);
    try {
        require_exists(scenario_path);
        fs::create_directories(out);
        const io::ScenarioDoc doc = io::scenario_doc_from_json(io::read_file(scenario_path));
        doc.vehicle.validate();

        // force curve: explicit CSV > force network > closed-form half-sine
        ForceCurve curve;
        if (!force_csv.empty()) {
            require_exists(force_csv);
            curve = io::read_force_csv(force_csv);
        } else if (!force_ckpt.empty()) {
            require_exists(force_ckpt);
            const fm::ForceModel fmodel = fm::ForceModel::load(force_ckpt);
            curve = fmodel.predict_curve(doc.collision.feature_vector());
        } else {
            const ImpulseSolution sol = solve_impulse(doc.collision);
            curve.dt = 1e-3;
            curve.t_end = pulse;
            const int n = static_cast<int>(std::lround(pulse / curve.dt)) + 1;
            const double kPi = 3.14159265358979323846;
            for (int i = 0; i < n; ++i) {
                const double t = i * curve.dt;
                const double w = kPi / (2.0 * pulse) * std::sin(kPi * t / pulse);
                curve.samples.push_back(Eigen::Vector2d(sol.P_x * w, sol.P_y * w));
            }
        }
        io::write_force_csv((fs::path(out) / "force.csv").string(), curve);

        VehicleState initial;
        initial.v_x = doc.collision.v_tx;
        initial.v_y = doc.collision.v_ty;
        initial.psi_dot = doc.collision.psi_dot_t;

        json resolved = {{"command", "predict"},   {"model", model_kind},
                         {"scenario", scenario_path}, {"horizon", doc.horizon},
                         {"force_model", force_ckpt}, {"dynamics_model", dyn_ckpt}};
        write_snapshot(out, resolved);

        if (model_kind == "4dof") {
            const Trajectory traj = integrate(initial, doc.vehicle, nullptr, &curve,
                                              doc.application, doc.horizon);
            io::write_trajectory_csv((fs::path(out) / "trajectory.csv").string(), traj);
            return 0;
        }
        require_exists(dyn_ckpt);
        const ap::ApinnModel model = ap::ApinnModel::load(dyn_ckpt);
        const ap::RolloutResult roll =
            model.rollout(initial, curve, doc.application, doc.vehicle, doc.horizon);
        io::write_trajectory_csv((fs::path(out) / "trajectory.csv").string(), roll.traj);
        const double dt = model.config().step_dt;
        write_gmm_bands((fs::path(out) / "bands.csv").string(), roll.traj, roll.gmms, dt);
        if (!roll.gmms.empty()) {
            const VehicleState& last = roll.traj.states[roll.traj.states.size() - 2];
            const ut::TrajectoryGmm g =
                ut::trajectory_gmm(roll.gmms.back(), last.X, last.Y, last.psi, dt);
            write_density((fs::path(out) / "density.csv").string(), ut::density_grid(g));
        }
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "inference failed: " << e.what() << "\n";
        return 5;
    }
}

int run_evaluate(const std::string& truth_dir, const std::string& pred_dir,
                 const std::string& out_raw) {
    const std::string out = resolve_out(out_raw);
    try {
        require_exists(truth_dir);
        require_exists(pred_dir);
        fs::create_directories(out);
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(truth_dir))
            if (entry.path().extension() == ".csv" &&
                fs::exists(fs::path(pred_dir) / entry.path().filename()))
                names.push_back(entry.path().filename().string());
        std::sort(names.begin(), names.end());
        if (names.empty()) throw MissingInput("no matching trajectory CSVs between " +
                                              truth_dir + " and " + pred_dir);
        std::vector<data::EvalCase> cases;
        for (const auto& n : names) {
            data::EvalCase c;
            c.truth = io::read_trajectory_csv((fs::path(truth_dir) / n).string());
            c.prediction = io::read_trajectory_csv((fs::path(pred_dir) / n).string());
            cases.push_back(std::move(c));
        }
        const data::EvalMetrics m = data::evaluate(cases);
        std::vector<std::vector<double>> rows;
        for (int c = 0; c < 5; ++c) rows.push_back({m.rmse_mean(c), m.rmse_std(c)});
        io::write_table_csv((fs::path(out) / "metrics.csv").string(), "rmse_mean,rmse_std",
                            rows);
        const char* labels[5] = {"X [m]", "Y [m]", "v_x [m/s]", "v_y [m/s]",
                                 "yaw rate [rad/s]"};
        std::string table = "metric           mean       std\n";
        for (int c = 0; c < 5; ++c)
            table += std::string(labels[c]) + "  " + io::format_double(m.rmse_mean(c)) +
                     "  " + io::format_double(m.rmse_std(c)) + "\n";
        table += "mean trajectory error [m]: " + io::format_double(m.avg_error) + "\n";
        io::write_file((fs::path(out) / "metrics.txt").string(), table);
        json resolved = {{"command", "evaluate"}, {"truth", truth_dir}, {"pred", pred_dir}};
        write_snapshot(out, resolved);
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ModelError& e) {
        std::cerr << "evaluation failed: " << e.what() << "\n";
        return 2;
    }
}

int run_cluster(const std::string& data_dir, uint64_t seed, const std::string& out_raw) {
    const std::string out = resolve_out(out_raw);
    try {
        fs::create_directories(out);
        const fm::ForceDataset dataset = load_dataset(data_dir);
        const data::ClusterReport report = data::cluster_by_impulse(dataset, seed);
        json j = {{"k", report.k},
                  {"silhouette_per_k", report.silhouette_per_k},
                  {"membership", report.membership},
                  {"merge_log", report.merge_log},
                  {"seed", seed}};
        io::write_file((fs::path(out) / "cluster.json").string(), j.dump(2) + "\n");
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < report.feature_table.size(); ++i) {
            std::vector<double> row = report.feature_table[i];
            row.push_back(static_cast<double>(report.membership[i]));
            rows.push_back(std::move(row));
        }
        io::write_table_csv((fs::path(out) / "cluster.csv").string(),
                            "I_fx,I_fy,I_total,F_max,F_mean,F_std,cluster", rows);
        json resolved = {{"command", "cluster"}, {"seed", seed}, {"data", data_dir}};
        write_snapshot(out, resolved);
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "clustering failed: " << e.what() << "\n";
        return 2;
    }
}

int run_report(const std::vector<std::string>& dirs, const std::string& out_raw) {
    const std::string out = resolve_out(out_raw);
    try {
        if (dirs.empty()) throw MissingInput("report: no input directories");
        fs::create_directories(out);
        std::string text = "pitdyn report\n=============\n";
        bool found = false;
        for (const auto& dir : dirs) {
            require_exists(dir);
            text += "\n[" + dir + "]\n";
            const fs::path manifest = fs::path(dir) / "manifest.json";
            const fs::path config = fs::path(dir) / "config.json";
            if (fs::exists(manifest)) {
                const json m = json::parse(io::read_file(manifest.string()));
                text += "seed: " + m.at("seed").dump() + "\n";
                text += "config_hash: " + m.at("config_hash").dump() + "\n";
                found = true;
            } else if (fs::exists(config)) {
                const std::string cfg = io::read_file(config.string());
                const json c = json::parse(cfg);
                if (c.contains("seed")) text += "seed: " + c.at("seed").dump() + "\n";
                text += "config_hash: " + std::to_string(io::fnv1a(c.dump())) + "\n";
                found = true;
            }
            for (const char* name : {"metrics.txt", "history.csv", "cluster.json"}) {
                const fs::path p = fs::path(dir) / name;
                if (!fs::exists(p)) continue;
                text += std::string("--- ") + name + " ---\n" + io::read_file(p.string());
                found = true;
            }
        }
        if (!found) throw MissingInput("report: no artifacts found in inputs");
        io::write_file((fs::path(out) / "report.txt").string(), text);
        return 0;
    } catch (const MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ModelError& e) {
        std::cerr << "report failed: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pitdyn: collision-dynamics pipeline"};
    app.require_subcommand(1);

    // gen-data
    data::SurrogateConfig gen_cfg;
    std::string gen_out = "dataset";
    auto* gen = app.add_subcommand("gen-data", "generate a surrogate force dataset");
    gen->add_option("--scenarios", gen_cfg.scenarios);
    gen->add_option("--seed", gen_cfg.seed);
    gen->add_option("--target-mass", gen_cfg.target_mass);
    gen->add_option("--speed-min", gen_cfg.speed_min);
    gen->add_option("--speed-max", gen_cfg.speed_max);
    gen->add_option("--pulse-min", gen_cfg.pulse_min);
    gen->add_option("--pulse-max", gen_cfg.pulse_max);
    gen->add_option("--noise", gen_cfg.noise_scale);
    gen->add_option("--restitution", gen_cfg.e);
    gen->add_option("--mu-max", gen_cfg.mu_max);
    gen->add_option("--out", gen_out);

    // train-force
    fm::ForceModelConfig fcfg;
    std::string tf_data = "dataset", tf_out = "force_model";
    auto* tf = app.add_subcommand("train-force", "train the impact-force network");
    tf->add_option("--data", tf_data);
    tf->add_option("--out", tf_out);
    tf->add_option("--epochs", fcfg.epochs);
    tf->add_option("--seed", fcfg.seed);
    tf->add_option("--hidden", fcfg.hidden);
    tf->add_option("--components", fcfg.K);
    tf->add_option("--lr", fcfg.lr);
    tf->add_option("--batch", fcfg.batch);

    // train-dynamics
    ap::ApinnConfig acfg;
    std::string td_data = "dataset", td_out = "dyn_model";
    double td_horizon = 5.0;
    int td_limit = 0;
    bool td_nn_only = false;
    auto* td = app.add_subcommand("train-dynamics", "pre-train the state predictor");
    td->add_option("--data", td_data);
    td->add_option("--out", td_out);
    td->add_option("--epochs", acfg.epochs_pretrain);
    td->add_option("--seed", acfg.seed);
    td->add_option("--hidden", acfg.hidden);
    td->add_option("--components", acfg.J);
    td->add_option("--lr", acfg.lr);
    td->add_option("--horizon", td_horizon);
    td->add_option("--limit", td_limit, "cap the number of training trajectories");
    td->add_flag("--nn-only", td_nn_only, "physics-free baseline");

    // finetune
    std::string ft_ckpt, ft_data = "dataset", ft_out = "dyn_finetuned";
    int ft_traj = 20, ft_epochs = 0, ft_hidden = 0;
    double ft_freeze = 0.6, ft_horizon = 5.0;
    auto* ft = app.add_subcommand("finetune", "fine-tune on plant trajectories");
    ft->add_option("--checkpoint", ft_ckpt)->required();
    ft->add_option("--data", ft_data);
    ft->add_option("--out", ft_out);
    ft->add_option("--trajectories", ft_traj);
    ft->add_option("--epochs", ft_epochs);
    ft->add_option("--freeze-ratio", ft_freeze);
    ft->add_option("--hidden", ft_hidden);
    ft->add_option("--horizon", ft_horizon);

    // predict
    std::string pr_scenario, pr_force_ckpt, pr_dyn_ckpt, pr_force_csv;
    std::string pr_model = "pinn", pr_out = "prediction";
    double pr_pulse = 0.1;
    auto* pr = app.add_subcommand("predict", "predict a trajectory with uncertainty");
    pr->add_option("--scenario", pr_scenario)->required();
    pr->add_option("--force-model", pr_force_ckpt);
    pr->add_option("--dynamics-model", pr_dyn_ckpt);
    pr->add_option("--force", pr_force_csv, "explicit force CSV override");
    pr->add_option("--model", pr_model)
        ->check(CLI::IsMember({"pinn", "4dof", "nn-only"}));
    pr->add_option("--pulse", pr_pulse, "half-sine pulse span without a force net [s]");
    pr->add_option("--out", pr_out);

    // evaluate
    std::string ev_truth, ev_pred, ev_out = "evaluation";
    auto* ev = app.add_subcommand("evaluate", "compare trajectory directories");
    ev->add_option("--truth", ev_truth)->required();
    ev->add_option("--pred", ev_pred)->required();
    ev->add_option("--out", ev_out);

    // cluster
    std::string cl_data = "dataset", cl_out = "clusters";
    uint64_t cl_seed = 1;
    auto* cl = app.add_subcommand("cluster", "cluster cases by impulse features");
    cl->add_option("--data", cl_data);
    cl->add_option("--seed", cl_seed);
    cl->add_option("--out", cl_out);

    // report
    std::vector<std::string> rp_dirs;
    std::string rp_out = "report";
    auto* rp = app.add_subcommand("report", "aggregate artifacts into one report");
    rp->add_option("--in", rp_dirs, "artifact directories");
    rp->add_option("--out", rp_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen->parsed()) return run_gen_data(gen_cfg, gen_out);
    if (tf->parsed()) return run_train_force(tf_data, tf_out, fcfg);
    if (td->parsed())
        return run_train_dynamics(td_data, td_out, acfg, td_horizon, td_limit, td_nn_only);
    if (ft->parsed())
        return run_finetune(ft_ckpt, ft_data, ft_out, ft_traj, ft_epochs, ft_freeze,
                            ft_hidden, ft_horizon);
    if (pr->parsed())
        return run_predict(pr_scenario, pr_force_ckpt, pr_dyn_ckpt, pr_force_csv, pr_model,
                           pr_out, pr_pulse);
    if (ev->parsed()) return run_evaluate(ev_truth, ev_pred, ev_out);
    if (cl->parsed()) return run_cluster(cl_data, cl_seed, cl_out);
    if (rp->parsed()) return run_report(rp_dirs, rp_out);
    return 2;
}
