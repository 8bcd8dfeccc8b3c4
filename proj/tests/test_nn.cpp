#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "pitdyn/errors.hpp"
#include "pitdyn/nn.hpp"

using namespace pitdyn;
using nn::Mat;

namespace {

nn::Model make_mlp(std::mt19937_64& rng) {
    nn::Model m;
    m.add_layer(3, 8, "h1", rng);
    m.add_layer(8, 8, "h2", rng);
    m.add_layer(8, 2, "out", rng);
    return m;
}

double train_steps(nn::Model& m, int steps, uint64_t data_seed) {
    std::mt19937_64 rng(data_seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    nn::AdamOptimizer opt(1e-3);
    double last = 0.0;
    for (int s = 0; s < steps; ++s) {
        Mat x(4, 3), y(4, 2);
        for (int i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
        for (int i = 0; i < y.size(); ++i) y.data()[i] = u(rng);
        nn::Tape t;
        m.bind(t);
        nn::Var h = m.dense_act(t, t.constant(x), 0, nn::Activation::Swish);
        h = m.dense_act(t, h, 1, nn::Activation::Swish);
        nn::Var out = m.dense(t, h, 2);
        nn::Var loss = t.mean(t.square(t.sub(out, t.constant(y))));
        t.backward(loss);
        opt.step(m, t);
        last = t.value(loss)(0, 0);
    }
    return last;
}

} // namespace

TEST_CASE("adam: zero gradient leaves weights unchanged") {
    std::mt19937_64 rng(1);
    nn::Model m = make_mlp(rng);
    const Mat w0 = m.layer(0).W;
    nn::Tape t;
    m.bind(t);
    // loss independent of the parameters
    nn::Var loss = t.sum(t.constant(Mat::Zero(1, 1)));
    t.backward(loss);
    nn::AdamOptimizer opt;
    opt.step(m, t);
    CHECK((m.layer(0).W - w0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("adam: first step magnitude is about lr for constant gradient") {
    std::mt19937_64 rng(2);
    nn::Model m;
    m.add_layer(2, 2, "only", rng);
    const Mat w0 = m.layer(0).W;
    nn::Tape t;
    m.bind(t);
    // loss = sum(W) -> gradient of ones
    nn::Var loss = t.sum(m.dense(t, t.constant(Mat::Identity(2, 2)), 0));
    t.backward(loss);
    nn::AdamOptimizer opt(1e-3);
    opt.step(m, t);
    const Mat step = (m.layer(0).W - w0).cwiseAbs();
    for (int i = 0; i < step.size(); ++i)
        CHECK(step.data()[i] == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("adam: identical seeds give bit-identical training") {
    std::mt19937_64 ra(3), rb(3);
    nn::Model a = make_mlp(ra), b = make_mlp(rb);
    train_steps(a, 25, 77);
    train_steps(b, 25, 77);
    for (int i = 0; i < a.num_layers(); ++i) {
        CHECK(a.layer(i).W == b.layer(i).W);
        CHECK(a.layer(i).b == b.layer(i).b);
    }
}

TEST_CASE("training reduces loss on a fixed batch") {
    std::mt19937_64 rng(5);
    nn::Model m = make_mlp(rng);
    std::mt19937_64 drng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat x(8, 3), y(8, 2);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = u(drng);
    for (int i = 0; i < y.size(); ++i) y.data()[i] = u(drng);
    nn::AdamOptimizer opt(1e-2);
    auto loss_of = [&]() {
        nn::Tape t;
        m.bind(t);
        nn::Var h = m.dense_act(t, t.constant(x), 0, nn::Activation::Swish);
        h = m.dense_act(t, h, 1, nn::Activation::Swish);
        nn::Var loss = t.mean(t.square(t.sub(m.dense(t, h, 2), t.constant(y))));
        t.backward(loss);
        opt.step(m, t);
        return t.value(loss)(0, 0);
    };
    const double first = loss_of();
    double last = first;
    for (int i = 0; i < 200; ++i) last = loss_of();
    CHECK(last < 0.5 * first);
}

TEST_CASE("freeze_prefix: 60 percent rule and bit-equality under training") {
    std::mt19937_64 rng(7);
    nn::Model m;
    for (int i = 0; i < 5; ++i) m.add_layer(3, 3, "l" + std::to_string(i), rng);
    // pad to io shape used by train_steps
    nn::Model net = make_mlp(rng);
    CHECK(m.freeze_prefix(0.6) == 3);
    CHECK(m.layer(0).frozen);
    CHECK(m.layer(2).frozen);
    CHECK(!m.layer(3).frozen);

    const int frozen = net.freeze_prefix(0.6);
    CHECK(frozen == 1); // floor(0.6 * 3)
    const Mat w0 = net.layer(0).W;
    const Eigen::RowVectorXd b0 = net.layer(0).b;
    const Mat w1 = net.layer(1).W;
    train_steps(net, 30, 99);
    CHECK(net.layer(0).W == w0);
    CHECK(net.layer(0).b == b0);
    CHECK(net.layer(1).W != w1); // active layers still move
}

TEST_CASE("architecture hash tracks shapes only") {
    std::mt19937_64 r1(11), r2(12);
    nn::Model a = make_mlp(r1), b = make_mlp(r2);
    CHECK(a.architecture_hash() == b.architecture_hash());
    nn::Model c = make_mlp(r1);
    c.add_layer(2, 2, "extra", r1);
    CHECK(a.architecture_hash() != c.architecture_hash());
}

TEST_CASE("checkpoint round trip preserves weights, flags, and metadata") {
    std::mt19937_64 rng(13);
    nn::Model m = make_mlp(rng);
    m.freeze_prefix(0.6);
    nn::CheckpointMeta meta;
    meta.seed = 424242;
    meta.epoch = 17;
    meta.architecture_hash = m.architecture_hash();
    meta.trained = true;
    meta.extra_json = "{\"kind\":\"test\"}";
    const std::string path = "/tmp/pitdyn_ckpt_test.bin";
    nn::save_checkpoint(path, m, meta);

    nn::Model loaded;
    const nn::CheckpointMeta got = nn::load_checkpoint(path, loaded);
    CHECK(got.seed == meta.seed);
    CHECK(got.epoch == meta.epoch);
    CHECK(got.architecture_hash == meta.architecture_hash);
    CHECK(got.trained == meta.trained);
    CHECK(got.extra_json == meta.extra_json);
    REQUIRE(loaded.num_layers() == m.num_layers());
    for (int i = 0; i < m.num_layers(); ++i) {
        CHECK(loaded.layer(i).W == m.layer(i).W);
        CHECK(loaded.layer(i).b == m.layer(i).b);
        CHECK(loaded.layer(i).frozen == m.layer(i).frozen);
        CHECK(loaded.layer(i).name == m.layer(i).name);
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint load rejects corrupt files") {
    const std::string path = "/tmp/pitdyn_ckpt_bad.bin";
    {
        FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("not a checkpoint", f);
        std::fclose(f);
    }
    nn::Model m;
    CHECK_THROWS_AS(nn::load_checkpoint(path, m), ModelError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(nn::load_checkpoint("/tmp/does_not_exist_pitdyn.bin", m), ModelError);
}

TEST_CASE("init_weight scale follows fan-in") {
    std::mt19937_64 rng(17);
    const Mat w = nn::init_weight(100, 50, rng);
    const double bound = std::sqrt(6.0 / 100.0);
    CHECK(w.cwiseAbs().maxCoeff() <= bound + 1e-12);
    CHECK(w.cwiseAbs().maxCoeff() > 0.5 * bound);
}
