#include "pitdyn/autodiff.hpp"

#include <cmath>

#include "pitdyn/errors.hpp"

namespace pitdyn::ad {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

Eigen::VectorXd time_encoding(double t, int d) {
    if (d % 2 != 0) throw DimMismatch("time_encoding: d must be even");
    Eigen::VectorXd pe(d);
    for (int i = 0; i < d / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / d);
        pe(2 * i) = std::sin(t * freq);
        pe(2 * i + 1) = std::cos(t * freq);
    }
    return pe;
}

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backfn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backfn = std::move(backfn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(const Mat& value, bool frozen) {
    Node n;
    n.value = value;
    n.requires_grad = true;
    n.frozen = frozen;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Mat& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad || n.frozen) return;
    n.grad += g;
}

void Tape::backward(Var loss) {
    if (nodes_[loss.id].value.size() != 1)
        throw DimMismatch("backward: loss must be scalar");
    for (Node& n : nodes_) {
        if (n.requires_grad)
            n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        else
            n.grad.resize(0, 0);
    }
    nodes_[loss.id].grad = Mat::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backfn) n.backfn(*this, n.grad);
    }
    // frozen leaves stay untouched by contract
    for (Node& n : nodes_)
        if (n.frozen && n.requires_grad) n.grad.setZero();
}

Var Tape::add(Var a, Var b) {
    Mat v = nodes_[a.id].value + nodes_[b.id].value;
    return push(std::move(v), true, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var Tape::sub(Var a, Var b) {
    Mat v = nodes_[a.id].value - nodes_[b.id].value;
    return push(std::move(v), true, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        t.accumulate(b, Mat(-g));
    });
}

Var Tape::mul(Var a, Var b) {
    Mat v = nodes_[a.id].value.cwiseProduct(nodes_[b.id].value);
    return push(std::move(v), true, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g.cwiseProduct(t.value(b)));
        t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
}

Var Tape::divide(Var a, Var b) {
    Mat v = nodes_[a.id].value.cwiseQuotient(nodes_[b.id].value);
    return push(std::move(v), true, [a, b](Tape& t, const Mat& g) {
        const Mat& bv = t.value(b);
        t.accumulate(a, g.cwiseQuotient(bv));
        t.accumulate(b, Mat(-g.cwiseProduct(t.value(a)).cwiseQuotient(bv.cwiseProduct(bv))));
    });
}

Var Tape::matmul(Var a, Var b) {
    if (nodes_[a.id].value.cols() != nodes_[b.id].value.rows())
        throw DimMismatch("matmul: inner dimensions disagree");
    Mat v = nodes_[a.id].value * nodes_[b.id].value;
    return push(std::move(v), true, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g * t.value(b).transpose());
        t.accumulate(b, t.value(a).transpose() * g);
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    if (nodes_[a.id].value.cols() != nodes_[b.id].value.cols())
        throw DimMismatch("matmul_nt: inner dimensions disagree");
    Mat v = nodes_[a.id].value * nodes_[b.id].value.transpose();
    return push(std::move(v), true, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g * t.value(b));
        t.accumulate(b, g.transpose() * t.value(a));
    });
}

Var Tape::add_rowvec(Var a, Var row) {
    if (nodes_[row.id].value.rows() != 1 ||
        nodes_[row.id].value.cols() != nodes_[a.id].value.cols())
        throw DimMismatch("add_rowvec: row shape mismatch");
    Mat v = nodes_[a.id].value.rowwise() + nodes_[row.id].value.row(0);
    return push(std::move(v), true, [a, row](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        t.accumulate(row, Mat(g.colwise().sum()));
    });
}

Var Tape::scale(Var a, double k) {
    Mat v = k * nodes_[a.id].value;
    return push(std::move(v), true,
                [a, k](Tape& t, const Mat& g) { t.accumulate(a, Mat(k * g)); });
}

Var Tape::add_scalar(Var a, double k) {
    Mat v = nodes_[a.id].value.array() + k;
    return push(std::move(v), true, [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Var Tape::swish(Var a) {
    const Mat& x = nodes_[a.id].value;
    Mat s = x.unaryExpr([](double v) { return pitdyn::ad::sigmoid(v); });
    Mat v = x.cwiseProduct(s);
    return push(std::move(v), true, [a, s](Tape& t, const Mat& g) {
        const Mat& x = t.value(a);
        // d/dx [x*s(x)] = s + x*s*(1-s)
        Mat d = s.array() + x.array() * s.array() * (1.0 - s.array());
        t.accumulate(a, g.cwiseProduct(d));
    });
}

Var Tape::tanh(Var a) {
    Mat v = nodes_[a.id].value.array().tanh();
    return push(std::move(v), true, [a, v](Tape& t, const Mat& g) {
        Mat d = 1.0 - v.array().square();
        t.accumulate(a, g.cwiseProduct(d));
    });
}

Var Tape::sigmoid(Var a) {
    Mat v = nodes_[a.id].value.unaryExpr([](double x) { return pitdyn::ad::sigmoid(x); });
    return push(std::move(v), true, [a, v](Tape& t, const Mat& g) {
        Mat d = v.array() * (1.0 - v.array());
        t.accumulate(a, g.cwiseProduct(d));
    });
}

Var Tape::softplus(Var a) {
    Mat v = nodes_[a.id].value.unaryExpr([](double x) { return pitdyn::ad::softplus(x); });
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        Mat d = t.value(a).unaryExpr([](double x) { return pitdyn::ad::sigmoid(x); });
        t.accumulate(a, g.cwiseProduct(d));
    });
}

Var Tape::exp(Var a) {
    Mat v = nodes_[a.id].value.array().exp();
    return push(std::move(v), true,
                [a, v](Tape& t, const Mat& g) { t.accumulate(a, g.cwiseProduct(v)); });
}

Var Tape::log(Var a) {
    Mat v = nodes_[a.id].value.array().log();
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        t.accumulate(a, g.cwiseQuotient(t.value(a)));
    });
}

Var Tape::square(Var a) {
    Mat v = nodes_[a.id].value.array().square();
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        t.accumulate(a, Mat(2.0 * g.cwiseProduct(t.value(a))));
    });
}

Var Tape::abs(Var a) {
    Mat v = nodes_[a.id].value.array().abs();
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        Mat d = t.value(a).unaryExpr([](double x) { return x >= 0.0 ? 1.0 : -1.0; });
        t.accumulate(a, g.cwiseProduct(d));
    });
}

Var Tape::sum(Var a) {
    Mat v(1, 1);
    v(0, 0) = nodes_[a.id].value.sum();
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        const Mat& av = t.value(a);
        t.accumulate(a, Mat(Mat::Constant(av.rows(), av.cols(), g(0, 0))));
    });
}

Var Tape::mean(Var a) {
    const double n = static_cast<double>(nodes_[a.id].value.size());
    Mat v(1, 1);
    v(0, 0) = nodes_[a.id].value.sum() / n;
    return push(std::move(v), true, [a, n](Tape& t, const Mat& g) {
        const Mat& av = t.value(a);
        t.accumulate(a, Mat(Mat::Constant(av.rows(), av.cols(), g(0, 0) / n)));
    });
}

Var Tape::row_sum(Var a) {
    Mat v = nodes_[a.id].value.rowwise().sum();
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        const Mat& av = t.value(a);
        Mat d(av.rows(), av.cols());
        for (int c = 0; c < av.cols(); ++c) d.col(c) = g.col(0);
        t.accumulate(a, d);
    });
}

Var Tape::softmax_rows(Var a) {
    const Mat& x = nodes_[a.id].value;
    Mat v(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
        v.row(r) = e / e.sum();
    }
    return push(std::move(v), true, [a, v](Tape& t, const Mat& g) {
        Mat d(v.rows(), v.cols());
        for (int r = 0; r < v.rows(); ++r) {
            const double dot = g.row(r).dot(v.row(r));
            d.row(r) = v.row(r).cwiseProduct(Eigen::RowVectorXd((g.row(r).array() - dot).matrix()));
        }
        t.accumulate(a, d);
    });
}

Var Tape::logsumexp_rows(Var a) {
    const Mat& x = nodes_[a.id].value;
    Mat v(x.rows(), 1);
    Mat soft(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
        const double s = e.sum();
        v(r, 0) = m + std::log(s);
        soft.row(r) = e / s;
    }
    return push(std::move(v), true, [a, soft](Tape& t, const Mat& g) {
        Mat d(soft.rows(), soft.cols());
        for (int r = 0; r < soft.rows(); ++r) d.row(r) = g(r, 0) * soft.row(r);
        t.accumulate(a, d);
    });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimMismatch("concat_cols: empty");
    const int rows = static_cast<int>(nodes_[parts[0].id].value.rows());
    int cols = 0;
    for (Var p : parts) {
        if (nodes_[p.id].value.rows() != rows) throw DimMismatch("concat_cols: row mismatch");
        cols += static_cast<int>(nodes_[p.id].value.cols());
    }
    Mat v(rows, cols);
    int off = 0;
    std::vector<int> offsets;
    for (Var p : parts) {
        const int c = static_cast<int>(nodes_[p.id].value.cols());
        v.middleCols(off, c) = nodes_[p.id].value;
        offsets.push_back(off);
        off += c;
    }
    auto ps = parts;
    return push(std::move(v), true, [ps, offsets](Tape& t, const Mat& g) {
        for (size_t i = 0; i < ps.size(); ++i) {
            const int c = static_cast<int>(t.value(ps[i]).cols());
            t.accumulate(ps[i], Mat(g.middleCols(offsets[i], c)));
        }
    });
}

Var Tape::slice_cols(Var a, int start, int count) {
    Mat v = nodes_[a.id].value.middleCols(start, count);
    return push(std::move(v), true, [a, start, count](Tape& t, const Mat& g) {
        const Mat& av = t.value(a);
        Mat d = Mat::Zero(av.rows(), av.cols());
        d.middleCols(start, count) = g;
        t.accumulate(a, d);
    });
}

Var Tape::broadcast_rows(Var a, int n) {
    if (nodes_[a.id].value.rows() != 1) throw DimMismatch("broadcast_rows: expects 1xM");
    Mat v(n, nodes_[a.id].value.cols());
    for (int r = 0; r < n; ++r) v.row(r) = nodes_[a.id].value.row(0);
    return push(std::move(v), true, [a](Tape& t, const Mat& g) {
        t.accumulate(a, Mat(g.colwise().sum()));
    });
}

Var Tape::mul_colvec(Var col, Var a) {
    if (nodes_[col.id].value.cols() != 1 ||
        nodes_[col.id].value.rows() != nodes_[a.id].value.rows())
        throw DimMismatch("mul_colvec: column shape mismatch");
    Mat v = nodes_[a.id].value.array().colwise() * nodes_[col.id].value.col(0).array();
    return push(std::move(v), true, [col, a](Tape& t, const Mat& g) {
        const Mat& av = t.value(a);
        t.accumulate(col, Mat(g.cwiseProduct(av).rowwise().sum()));
        Mat d = g.array().colwise() * t.value(col).col(0).array();
        t.accumulate(a, d);
    });
}

Var attention(Tape& t, Var Q, Var K, Var V) {
    const double dk = static_cast<double>(t.value(K).cols());
    Var scores = t.scale(t.matmul_nt(Q, K), 1.0 / std::sqrt(dk));
    Var w = t.softmax_rows(scores);
    return t.matmul(w, V);
}

} // namespace pitdyn::ad
