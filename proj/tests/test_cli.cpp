#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "pitdyn/io.hpp"

namespace fs = std::filesystem;
using namespace pitdyn;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PITDYN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

fs::path base_dir() {
    static fs::path base = [] {
        fs::path p = fs::temp_directory_path() / "pitdyn_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return base;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// shared dataset for the training/inference tests (8 cases, seed 5)
fs::path dataset_dir() {
    static fs::path ds = [] {
        const fs::path p = base_dir() / "ds";
        REQUIRE(run_cli("gen-data --scenarios 8 --seed 5 --out " + q(p)) == 0);
        return p;
    }();
    return ds;
}

// shared small dynamics checkpoint
fs::path dyn_dir() {
    static fs::path dm = [] {
        const fs::path p = base_dir() / "dm";
        REQUIRE(run_cli("train-dynamics --data " + q(dataset_dir()) + " --out " + q(p) +
                        " --epochs 2 --hidden 16 --components 2 --horizon 1.0 --limit 2") ==
                0);
        return p;
    }();
    return dm;
}

int count_lines(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    int n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

fs::path write_scenario_doc(const std::string& name, double horizon) {
    io::ScenarioDoc doc;
    doc.collision.m_t = 2000.0;
    doc.collision.m_b = 1800.0;
    doc.collision.I_zzt = 3200.0;
    doc.collision.I_zzb = 2900.0;
    doc.collision.v_tx = 8.0;
    doc.collision.v_bx = 8.0;
    doc.collision.v_by = 9.0;
    doc.collision.d_t = 0.9;
    doc.collision.d_b = 1.1;
    doc.collision.theta_t = 1.57;
    doc.collision.theta_b = -1.57;
    doc.collision.e = 0.5;
    doc.horizon = horizon;
    doc.application.z = 0.5;
    const fs::path p = base_dir() / name;
    io::write_file(p.string(), io::scenario_doc_to_json(doc));
    return p;
}

} // namespace

TEST_CASE("gen-data writes a complete, reproducible dataset") {
    const fs::path ds = dataset_dir();
    REQUIRE(fs::exists(ds / "manifest.json"));
    REQUIRE(fs::exists(ds / "config.json"));
    for (int i = 0; i < 8; ++i) {
        CHECK(fs::exists(ds / "cases" / ("case" + std::to_string(i) + ".json")));
        CHECK(fs::exists(ds / "cases" / ("case" + std::to_string(i) + ".csv")));
    }

    const fs::path ds2 = base_dir() / "ds_rerun";
    REQUIRE(run_cli("gen-data --scenarios 8 --seed 5 --out " + q(ds2)) == 0);
    CHECK(io::read_file((ds / "manifest.json").string()) ==
          io::read_file((ds2 / "manifest.json").string()));
    for (int i = 0; i < 8; ++i) {
        const std::string rel = "cases/case" + std::to_string(i) + ".csv";
        CHECK(io::read_file((ds / rel).string()) == io::read_file((ds2 / rel).string()));
    }

    const fs::path ds3 = base_dir() / "ds_other_seed";
    REQUIRE(run_cli("gen-data --scenarios 8 --seed 6 --out " + q(ds3)) == 0);
    CHECK(io::read_file((ds / "cases/case0.csv").string()) !=
          io::read_file((ds3 / "cases/case0.csv").string()));
}

TEST_CASE("invalid configuration and unknown flags exit with code 2") {
    CHECK(run_cli("gen-data --noise 2.0 --out " + q(base_dir() / "bad")) == 2);
    CHECK(run_cli("gen-data --no-such-flag 1") == 2);
    CHECK(run_cli("") == 2);
}

TEST_CASE("train-force produces a checkpoint and a full training history") {
    const fs::path out = base_dir() / "fm";
    const std::string before = io::read_file((dataset_dir() / "manifest.json").string());
    REQUIRE(run_cli("train-force --data " + q(dataset_dir()) + " --out " + q(out) +
                    " --epochs 3 --hidden 12 --components 2 --batch 4 --seed 2") == 0);
    CHECK(fs::exists(out / "force.ckpt"));
    CHECK(fs::exists(out / "config.json"));
    CHECK(count_lines(out / "history.csv") == 4); // header + one row per epoch

    // the input dataset must not be mutated by training
    CHECK(io::read_file((dataset_dir() / "manifest.json").string()) == before);

    CHECK(run_cli("train-force --data " + q(base_dir() / "nowhere") + " --out " +
                  q(base_dir() / "fm_missing")) == 6);
}

TEST_CASE("train-dynamics writes checkpoint and history; nn-only variant works") {
    CHECK(fs::exists(dyn_dir() / "apinn.ckpt"));
    CHECK(count_lines(dyn_dir() / "history.csv") == 3);

    const fs::path out = base_dir() / "dm_nn";
    REQUIRE(run_cli("train-dynamics --data " + q(dataset_dir()) + " --out " + q(out) +
                    " --epochs 1 --hidden 16 --components 2 --horizon 1.0 --limit 2 "
                    "--nn-only") == 0);
    CHECK(fs::exists(out / "apinn.ckpt"));
}

TEST_CASE("finetune checks the checkpoint architecture before training") {
    const fs::path ckpt = dyn_dir() / "apinn.ckpt";
    CHECK(run_cli("finetune --checkpoint " + q(ckpt) + " --data " + q(dataset_dir()) +
                  " --out " + q(base_dir() / "ft_bad") + " --hidden 32") == 2);
    CHECK(run_cli("finetune --checkpoint " + q(base_dir() / "missing.ckpt") + " --data " +
                  q(dataset_dir()) + " --out " + q(base_dir() / "ft_miss")) == 6);

    const fs::path out = base_dir() / "ft";
    REQUIRE(run_cli("finetune --checkpoint " + q(ckpt) + " --data " + q(dataset_dir()) +
                    " --out " + q(out) +
                    " --trajectories 1 --epochs 1 --horizon 1.0 --hidden 16") == 0);
    CHECK(fs::exists(out / "apinn.ckpt"));
    CHECK(fs::exists(out / "history.csv"));
}

TEST_CASE("predict with the reference model covers the horizon at 100 Hz") {
    const fs::path scen = write_scenario_doc("scen.json", 1.0);
    const fs::path out = base_dir() / "pred4";
    REQUIRE(run_cli("predict --scenario " + q(scen) + " --model 4dof --out " + q(out)) == 0);
    CHECK(fs::exists(out / "force.csv"));
    CHECK(count_lines(out / "trajectory.csv") == 102); // header + 101 samples

    // byte-identical rerun
    const fs::path out2 = base_dir() / "pred4_rerun";
    REQUIRE(run_cli("predict --scenario " + q(scen) + " --model 4dof --out " + q(out2)) ==
            0);
    CHECK(io::read_file((out / "trajectory.csv").string()) ==
          io::read_file((out2 / "trajectory.csv").string()));

    CHECK(run_cli("predict --scenario " + q(base_dir() / "absent.json") + " --model 4dof "
                  "--out " + q(base_dir() / "pred_miss")) == 6);
    CHECK(run_cli("predict --scenario " + q(scen) + " --model bogus --out " +
                  q(base_dir() / "pred_bogus")) == 2);
}

TEST_CASE("predict with the state network emits uncertainty artifacts") {
    const fs::path scen = write_scenario_doc("scen_short.json", 0.5);
    const fs::path out = base_dir() / "pred_pinn";
    REQUIRE(run_cli("predict --scenario " + q(scen) + " --model pinn --dynamics-model " +
                    q(dyn_dir() / "apinn.ckpt") + " --out " + q(out)) == 0);
    CHECK(fs::exists(out / "trajectory.csv"));
    CHECK(fs::exists(out / "bands.csv"));
    CHECK(fs::exists(out / "density.csv"));
    std::ifstream bands(out / "bands.csv");
    std::string header;
    std::getline(bands, header);
    CHECK(header == "t,mean_X,mean_Y,sigma_X,sigma_Y");

    // a missing dynamics checkpoint is a missing-input error
    CHECK(run_cli("predict --scenario " + q(scen) + " --model pinn --out " +
                  q(base_dir() / "pred_nockpt")) == 6);
}

TEST_CASE("evaluate reports a zero table when prediction equals truth") {
    const fs::path traj = base_dir() / "pred4" / "trajectory.csv";
    REQUIRE(fs::exists(traj));
    const fs::path truth = base_dir() / "ev_truth";
    const fs::path pred = base_dir() / "ev_pred";
    fs::create_directories(truth);
    fs::create_directories(pred);
    fs::copy_file(traj, truth / "case0.csv", fs::copy_options::overwrite_existing);
    fs::copy_file(traj, pred / "case0.csv", fs::copy_options::overwrite_existing);

    const fs::path out = base_dir() / "ev";
    REQUIRE(run_cli("evaluate --truth " + q(truth) + " --pred " + q(pred) + " --out " +
                    q(out)) == 0);
    std::ifstream metrics(out / "metrics.csv");
    std::string line;
    std::getline(metrics, line); // header
    int rows = 0;
    while (std::getline(metrics, line)) {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) CHECK(std::stod(cell) == 0.0);
        ++rows;
    }
    CHECK(rows == 5);
    CHECK(fs::exists(out / "metrics.txt"));

    CHECK(run_cli("evaluate --truth " + q(truth) + " --pred " +
                  q(base_dir() / "ev_nothing") + " --out " + q(base_dir() / "ev_bad")) == 6);
}

TEST_CASE("cluster exports assignments for every case") {
    const fs::path ds = base_dir() / "ds_cluster";
    REQUIRE(run_cli("gen-data --scenarios 12 --seed 9 --out " + q(ds)) == 0);
    const fs::path out = base_dir() / "cl";
    REQUIRE(run_cli("cluster --data " + q(ds) + " --seed 1 --out " + q(out)) == 0);
    REQUIRE(fs::exists(out / "cluster.json"));
    CHECK(count_lines(out / "cluster.csv") == 13); // header + one row per case
    const std::string j = io::read_file((out / "cluster.json").string());
    CHECK(j.find("\"k\"") != std::string::npos);
    CHECK(j.find("membership") != std::string::npos);
}

TEST_CASE("report aggregates provenance from artifact directories") {
    const fs::path out = base_dir() / "rep";
    REQUIRE(run_cli("report --in " + q(dataset_dir()) + " --in " + q(base_dir() / "ev") +
                    " --out " + q(out)) == 0);
    const std::string text = io::read_file((out / "report.txt").string());
    CHECK(text.find("seed") != std::string::npos);
    CHECK(text.find("config_hash") != std::string::npos);
    CHECK(text.find("metrics.txt") != std::string::npos);

    CHECK(run_cli("report --in " + q(base_dir() / "rep_missing_dir") + " --out " +
                  q(base_dir() / "rep_bad")) == 6);
}

TEST_CASE("relative output paths resolve under PITDYN_OUT_ROOT") {
    const fs::path root = base_dir() / "out_root";
    fs::create_directories(root);
    setenv("PITDYN_OUT_ROOT", root.c_str(), 1);
    REQUIRE(run_cli("gen-data --scenarios 1 --seed 2 --out rooted") == 0);
    unsetenv("PITDYN_OUT_ROOT");
    CHECK(fs::exists(root / "rooted" / "manifest.json"));
}
