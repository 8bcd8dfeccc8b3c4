#include "pitdyn/nn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "pitdyn/errors.hpp"

namespace pitdyn::nn {

using nlohmann::json;

Mat init_weight(int in, int out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> u(-limit, limit);
    Mat w(in, out);
    for (int i = 0; i < in; ++i)
        for (int j = 0; j < out; ++j) w(i, j) = u(rng);
    return w;
}

int Model::add_layer(int in, int out, const std::string& name, std::mt19937_64& rng) {
    DenseLayer l;
    l.W = init_weight(in, out, rng);
    l.b = Eigen::RowVectorXd::Zero(out);
    l.name = name;
    layers_.push_back(std::move(l));
    return static_cast<int>(layers_.size()) - 1;
}

void Model::bind(Tape& tape) {
    for (DenseLayer& l : layers_) {
        l.w_var = tape.leaf(l.W, l.frozen);
        l.b_var = tape.leaf(Mat(l.b), l.frozen);
    }
}

Var Model::dense(Tape& tape, Var x, int i) const {
    const DenseLayer& l = layers_[i];
    return tape.add_rowvec(tape.matmul(x, l.w_var), l.b_var);
}

Var Model::dense_act(Tape& tape, Var x, int i, Activation act) const {
    Var y = dense(tape, x, i);
    switch (act) {
    case Activation::Swish: return tape.swish(y);
    case Activation::Tanh: return tape.tanh(y);
    case Activation::None: break;
    }
    return y;
}

int Model::freeze_prefix(double ratio) {
    const int n_frozen = static_cast<int>(std::floor(ratio * num_layers()));
    for (int i = 0; i < num_layers(); ++i) layers_[i].frozen = i < n_frozen;
    return n_frozen;
}

void Model::unfreeze_all() {
    for (DenseLayer& l : layers_) l.frozen = false;
}

uint64_t Model::architecture_hash() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (const DenseLayer& l : layers_) {
        mix(static_cast<uint64_t>(l.W.rows()));
        mix(static_cast<uint64_t>(l.W.cols()));
    }
    return h;
}

void AdamOptimizer::step(Model& model, const Tape& tape) {
    if (m_.size() != static_cast<size_t>(model.num_layers())) {
        m_.assign(model.num_layers(), {});
        for (int i = 0; i < model.num_layers(); ++i) {
            const DenseLayer& l = model.layer(i);
            m_[i].m_w = Mat::Zero(l.W.rows(), l.W.cols());
            m_[i].v_w = Mat::Zero(l.W.rows(), l.W.cols());
            m_[i].m_b = Eigen::RowVectorXd::Zero(l.b.cols());
            m_[i].v_b = Eigen::RowVectorXd::Zero(l.b.cols());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int i = 0; i < model.num_layers(); ++i) {
        DenseLayer& l = model.layer(i);
        if (l.frozen || !l.w_var.valid()) continue;
        const Mat& gw = tape.grad(l.w_var);
        const Mat gb = tape.grad(l.b_var);
        Moments& mo = m_[i];
        mo.m_w = beta1_ * mo.m_w + (1.0 - beta1_) * gw;
        mo.v_w = beta2_ * mo.v_w.array() + (1.0 - beta2_) * gw.array().square();
        mo.m_b = beta1_ * mo.m_b + (1.0 - beta1_) * gb.row(0);
        mo.v_b = beta2_ * mo.v_b.array() + (1.0 - beta2_) * gb.row(0).array().square();
        l.W.array() -=
            lr_ * (mo.m_w.array() / bc1) / ((mo.v_w.array() / bc2).sqrt() + eps_);
        l.b.array() -=
            lr_ * (mo.m_b.array() / bc1) / ((mo.v_b.array() / bc2).sqrt() + eps_);
    }
}

namespace {
constexpr char kMagic[9] = "PITDYNW1";
} // namespace

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta) {
    json header;
    header["seed"] = meta.seed;
    header["epoch"] = meta.epoch;
    header["architecture_hash"] = meta.architecture_hash;
    header["trained"] = meta.trained;
    header["extra"] = json::parse(meta.extra_json);
    json layers = json::array();
    for (const DenseLayer& l : model.layers()) {
        layers.push_back({{"name", l.name},
                          {"in", l.W.rows()},
                          {"out", l.W.cols()},
                          {"frozen", l.frozen}});
    }
    header["layers"] = layers;
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw ModelError("save_checkpoint: cannot open " + path);
    f.write(kMagic, 8);
    const uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const DenseLayer& l : model.layers()) {
        f.write(reinterpret_cast<const char*>(l.W.data()),
                static_cast<std::streamsize>(sizeof(double) * l.W.size()));
        f.write(reinterpret_cast<const char*>(l.b.data()),
                static_cast<std::streamsize>(sizeof(double) * l.b.size()));
    }
}

CheckpointMeta load_checkpoint(const std::string& path, Model& model) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelError("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::string(magic, 8) != std::string(kMagic, 8))
        throw ModelError("load_checkpoint: bad magic bytes");
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    const json header = json::parse(hs);

    model.layers().clear();
    for (const auto& lj : header.at("layers")) {
        DenseLayer l;
        l.W.resize(lj.at("in").get<int>(), lj.at("out").get<int>());
        l.b = Eigen::RowVectorXd::Zero(lj.at("out").get<int>());
        l.frozen = lj.at("frozen").get<bool>();
        l.name = lj.at("name").get<std::string>();
        model.layers().push_back(std::move(l));
    }
    for (DenseLayer& l : model.layers()) {
        f.read(reinterpret_cast<char*>(l.W.data()),
               static_cast<std::streamsize>(sizeof(double) * l.W.size()));
        f.read(reinterpret_cast<char*>(l.b.data()),
               static_cast<std::streamsize>(sizeof(double) * l.b.size()));
    }
    if (!f) throw ModelError("load_checkpoint: truncated file");

    CheckpointMeta meta;
    meta.seed = header.at("seed").get<uint64_t>();
    meta.epoch = header.at("epoch").get<int>();
    meta.architecture_hash = header.at("architecture_hash").get<uint64_t>();
    meta.trained = header.at("trained").get<bool>();
    meta.extra_json = header.at("extra").dump();
    return meta;
}

} // namespace pitdyn::nn
