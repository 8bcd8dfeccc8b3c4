#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace pitdyn::ad {

using Mat = Eigen::MatrixXd;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense matrices. A tape records one forward pass;
/// backward() accumulates gradients for every node that requires them.
/// Frozen leaves keep a zero gradient regardless of the loss.
class Tape {
  public:
    /// Constant leaf, no gradient.
    Var constant(Mat value);
    /// Parameter leaf. Gradients are available via grad() after backward().
    Var leaf(const Mat& value, bool frozen = false);

    const Mat& value(Var v) const { return nodes_[v.id].value; }
    const Mat& grad(Var v) const { return nodes_[v.id].grad; }

    /// Seeds the (1x1) loss node with 1 and runs the reverse sweep.
    void backward(Var loss);

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // --- ops ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);    // a * b^T
    Var add_rowvec(Var a, Var row); // broadcast a 1xN row over all rows
    Var scale(Var a, double k);
    Var add_scalar(Var a, double k);
    Var neg(Var a) { return scale(a, -1.0); }
    Var swish(Var a);
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var softplus(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var square(Var a);
    Var abs(Var a);
    Var sum(Var a);              // -> 1x1
    Var mean(Var a);             // -> 1x1
    Var row_sum(Var a);          // NxM -> Nx1
    Var softmax_rows(Var a);
    Var logsumexp_rows(Var a);   // NxM -> Nx1
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var a, int start, int count);
    Var broadcast_rows(Var a, int n); // 1xM -> NxM
    Var mul_colvec(Var col, Var a);   // Nx1 col broadcast over columns of NxM
    Var divide(Var a, Var b);         // elementwise

  private:
    struct Node {
        Mat value;
        Mat grad;
        bool requires_grad = false;
        bool frozen = false;
        std::function<void(Tape&, const Mat&)> backfn; // receives dL/dself
    };

    Var push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backfn);
    void accumulate(Var v, const Mat& g);

    std::vector<Node> nodes_;
};

/// softmax(Q K^T / sqrt(d_k)) V for a single sequence.
Var attention(Tape& t, Var Q, Var K, Var V);

/// Sinusoidal time encoding, PE(t,2i)=sin(t/10000^{2i/d}),
/// PE(t,2i+1)=cos(t/10000^{2i/d}); d must be even.
Eigen::VectorXd time_encoding(double t, int d);

/// Overflow-safe scalar helpers shared with non-tape code.
double sigmoid(double x);
double softplus(double x);

} // namespace pitdyn::ad
