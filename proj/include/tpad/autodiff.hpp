#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tpad/mat.hpp"

namespace tpad::ad {

// Reverse-mode autodiff over Mat values. Each op builds a Node holding the
// result; backward() walks the graph in reverse creation order. Graphs are
// throwaway: one forward pass per graph, freed when the last Var goes out of
// scope. Parameter leaves persist across graphs and accumulate gradients.
struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false; // true only for parameter leaves
    bool needs_grad = false;    // reaches a parameter leaf
    bool grad_init = false;
    uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node(std::move(n)) {}

    bool defined() const { return static_cast<bool>(node); }
    const Mat& val() const { return node->val; }
    Mat& value_mut() { return node->val; }
    const Mat& grad() const { return node->grad; }
    bool has_grad() const { return node && node->grad_init; }
    int64_t rows() const { return node->val.r; }
    int64_t cols() const { return node->val.c; }

    std::shared_ptr<Node> node;
};

// Leaf construction.
Var leaf(Mat v, bool requires_grad = false);
inline Var constant(Mat v) { return leaf(std::move(v), false); }

// Gradient buffer helpers.
Mat& grad_buf(Node& n);
void clear_grad(const Var& v);
void clear_grads(const std::vector<Var>& vars);

// Elementwise / broadcast arithmetic.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_rowvec(const Var& a, const Var& row);   // row: 1 x C
Var mul_rowvec(const Var& a, const Var& row);   // row: 1 x C
Var mul_colvec(const Var& a, const Var& col);   // col: R x 1
Var mul_const(const Var& a, const Mat& m);      // elementwise, constant mask
Var inv(const Var& a);                          // 1/x
Var clamp(const Var& a, double lo, double hi);  // gradient zero outside range

// Nonlinearities.
Var tanh_(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
Var exp_(const Var& a);
Var log_(const Var& a, double floor = 1e-300);
Var sqrt0(const Var& a, double grad_floor = 1e-12); // sqrt(max(x,0)); exact 0 at 0
Var square(const Var& a);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b); // a * b^T
Var matmul_tn(const Var& a, const Var& b); // a^T * b

// Softmax families.
Var softmax_rows(const Var& a);
Var softmax_col(const Var& a); // softmax across rows of an R x 1 column

// Reductions and reshaping.
Var sum_all(const Var& a);  // 1 x 1
Var mean_all(const Var& a); // 1 x 1
Var row_sums(const Var& a); // R x 1
Var col_sums(const Var& a); // 1 x C
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, int64_t lo, int64_t len);
Var gather_rows(const Var& a, std::vector<int64_t> idx);
// Sums rows of an R x 1 column into groups; group_of[r] in [0, n_groups).
Var sum_groups(const Var& a, std::vector<int64_t> group_of, int64_t n_groups);
Var sqnorm_rows(const Var& a); // R x 1, sum of squares per row
Var outer_sum(const Var& u, const Var& v); // u: R x 1, v: C x 1 -> R x C of u_i + v_j
Var mean_of(const std::vector<Var>& parts); // elementwise mean of same-shape vars

// Categorical head utilities (logits: 1 x K). mask[k]==0 excludes option k.
Var cat_logprob(const Var& logits, const std::vector<char>& mask, int64_t k);
Var cat_entropy(const Var& logits, const std::vector<char>& mask);
std::vector<double> cat_probs(const Mat& logits, const std::vector<char>& mask);

// Backpropagation from a 1 x 1 root.
void backward(const Var& root);

} // namespace tpad::ad
