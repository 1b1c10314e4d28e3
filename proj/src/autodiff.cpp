#include "tpad/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "tpad/kernels.hpp"

namespace tpad::ad {

namespace {

std::atomic<uint64_t> g_next_id{1};

Var make_node(Mat val, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    n->parents.reserve(parents.size());
    bool needs = false;
    for (auto& p : parents) {
        needs = needs || p.node->needs_grad;
        n->parents.push_back(p.node);
    }
    n->needs_grad = needs;
    if (needs) n->back = std::move(back);
    return Var(std::move(n));
}

bool wants(const std::shared_ptr<Node>& p) { return p->needs_grad; }

void shape_check(bool ok, const char* what) { check_config(ok, std::string("autodiff shape mismatch in ") + what); }

} // namespace

Var leaf(Mat v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    return Var(std::move(n));
}

Mat& grad_buf(Node& n) {
    if (!n.grad_init) {
        n.grad = Mat::zeros(n.val.r, n.val.c);
        n.grad_init = true;
    }
    return n.grad;
}

void clear_grad(const Var& v) {
    if (v.defined()) {
        v.node->grad_init = false;
        v.node->grad = Mat();
    }
}

void clear_grads(const std::vector<Var>& vars) {
    for (const auto& v : vars) clear_grad(v);
}

Var add(const Var& a, const Var& b) {
    shape_check(a.val().same_shape(b.val()), "add");
    Mat out = a.val();
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b.val()[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        for (int pi = 0; pi < 2; ++pi) {
            auto& p = self.parents[pi];
            if (!wants(p)) continue;
            Mat& g = grad_buf(*p);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    shape_check(a.val().same_shape(b.val()), "sub");
    Mat out = a.val();
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= b.val()[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        if (wants(self.parents[0])) {
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self.parents[1])) {
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    shape_check(a.val().same_shape(b.val()), "mul");
    Mat out = a.val();
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= b.val()[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const Mat& av = self.parents[0]->val;
        const Mat& bv = self.parents[1]->val;
        if (wants(self.parents[0])) {
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (wants(self.parents[1])) {
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Mat out = a.val();
    for (auto& v : out.d) v *= s;
    return make_node(std::move(out), {a}, [s](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Var add_scalar(const Var& a, double s) {
    Mat out = a.val();
    for (auto& v : out.d) v += s;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Var add_rowvec(const Var& a, const Var& row) {
    shape_check(row.rows() == 1 && row.cols() == a.cols(), "add_rowvec");
    Mat out = a.val();
    for (int64_t i = 0; i < out.r; ++i)
        for (int64_t j = 0; j < out.c; ++j) out.at(i, j) += row.val()[j];
    return make_node(std::move(out), {a, row}, [](Node& self) {
        if (wants(self.parents[0])) {
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self.parents[1])) {
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < self.val.r; ++i)
                for (int64_t j = 0; j < self.val.c; ++j) g[j] += self.grad.at(i, j);
        }
    });
}

Var mul_rowvec(const Var& a, const Var& row) {
    shape_check(row.rows() == 1 && row.cols() == a.cols(), "mul_rowvec");
    Mat out = a.val();
    for (int64_t i = 0; i < out.r; ++i)
        for (int64_t j = 0; j < out.c; ++j) out.at(i, j) *= row.val()[j];
    return make_node(std::move(out), {a, row}, [](Node& self) {
        const Mat& av = self.parents[0]->val;
        const Mat& rv = self.parents[1]->val;
        if (wants(self.parents[0])) {
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < av.r; ++i)
                for (int64_t j = 0; j < av.c; ++j) g.at(i, j) += self.grad.at(i, j) * rv[j];
        }
        if (wants(self.parents[1])) {
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < av.r; ++i)
                for (int64_t j = 0; j < av.c; ++j) g[j] += self.grad.at(i, j) * av.at(i, j);
        }
    });
}

Var mul_colvec(const Var& a, const Var& col) {
    shape_check(col.cols() == 1 && col.rows() == a.rows(), "mul_colvec");
    Mat out = a.val();
    for (int64_t i = 0; i < out.r; ++i)
        for (int64_t j = 0; j < out.c; ++j) out.at(i, j) *= col.val()[i];
    return make_node(std::move(out), {a, col}, [](Node& self) {
        const Mat& av = self.parents[0]->val;
        const Mat& cv = self.parents[1]->val;
        if (wants(self.parents[0])) {
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < av.r; ++i)
                for (int64_t j = 0; j < av.c; ++j) g.at(i, j) += self.grad.at(i, j) * cv[i];
        }
        if (wants(self.parents[1])) {
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < av.r; ++i) {
                double acc = 0.0;
                for (int64_t j = 0; j < av.c; ++j) acc += self.grad.at(i, j) * av.at(i, j);
                g[i] += acc;
            }
        }
    });
}

Var mul_const(const Var& a, const Mat& m) {
    shape_check(a.val().same_shape(m), "mul_const");
    Mat out = a.val();
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= m[i];
    Mat mask = m;
    return make_node(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    });
}

Var inv(const Var& a) {
    Mat out = a.val();
    for (auto& v : out.d) v = 1.0 / v;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * y[i] * y[i];
    });
}

Var clamp(const Var& a, double lo, double hi) {
    Mat out = a.val();
    for (auto& v : out.d) v = std::min(hi, std::max(lo, v));
    return make_node(std::move(out), {a}, [lo, hi](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& x = self.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i)
            if (x[i] > lo && x[i] < hi) g[i] += self.grad[i];
    });
}

Var tanh_(const Var& a) {
    Mat out = a.val();
    for (auto& v : out.d) v = std::tanh(v);
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (1.0 - y[i] * y[i]);
    });
}

Var sigmoid(const Var& a) {
    Mat out = a.val();
    for (auto& v : out.d) v = 1.0 / (1.0 + std::exp(-v));
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (1.0 - y[i]);
    });
}

Var relu(const Var& a) {
    Mat out = a.val();
    for (auto& v : out.d) v = v > 0.0 ? v : 0.0;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& x = self.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) g[i] += self.grad[i];
    });
}

Var leaky_relu(const Var& a, double slope) {
    Mat out = a.val();
    for (auto& v : out.d) v = v > 0.0 ? v : slope * v;
    return make_node(std::move(out), {a}, [slope](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& x = self.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (x[i] > 0.0 ? 1.0 : slope);
    });
}

Var exp_(const Var& a) {
    Mat out = a.val();
    for (auto& v : out.d) v = std::exp(v);
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
    });
}

Var log_(const Var& a, double floor) {
    Mat out = a.val();
    for (auto& v : out.d) v = std::log(std::max(v, floor));
    return make_node(std::move(out), {a}, [floor](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& x = self.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / std::max(x[i], floor);
    });
}

Var sqrt0(const Var& a, double grad_floor) {
    Mat out = a.val();
    for (auto& v : out.d) v = std::sqrt(std::max(v, 0.0));
    return make_node(std::move(out), {a}, [grad_floor](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * 0.5 / std::max(y[i], grad_floor);
    });
}

Var square(const Var& a) {
    Mat out = a.val();
    for (auto& v : out.d) v *= v;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& x = self.parents[0]->val;
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * 2.0 * x[i];
    });
}

Var matmul(const Var& a, const Var& b) {
    shape_check(a.cols() == b.rows(), "matmul");
    Mat out(a.rows(), b.cols());
    kernels::matmul(a.val().d.data(), b.val().d.data(), out.d.data(), a.rows(), a.cols(), b.cols());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const Mat& av = self.parents[0]->val;
        const Mat& bv = self.parents[1]->val;
        if (wants(self.parents[0])) {
            Mat ga(av.r, av.c);
            kernels::matmul_nt(self.grad.d.data(), bv.d.data(), ga.d.data(), av.r, bv.c, bv.r);
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += ga[i];
        }
        if (wants(self.parents[1])) {
            Mat gb(bv.r, bv.c);
            kernels::matmul_tn(av.d.data(), self.grad.d.data(), gb.d.data(), av.r, av.c, bv.c);
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += gb[i];
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    shape_check(a.cols() == b.cols(), "matmul_nt");
    Mat out(a.rows(), b.rows());
    kernels::matmul_nt(a.val().d.data(), b.val().d.data(), out.d.data(), a.rows(), a.cols(), b.rows());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const Mat& av = self.parents[0]->val;
        const Mat& bv = self.parents[1]->val;
        if (wants(self.parents[0])) {
            // dA = G * B
            Mat ga(av.r, av.c);
            kernels::matmul(self.grad.d.data(), bv.d.data(), ga.d.data(), av.r, bv.r, bv.c);
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += ga[i];
        }
        if (wants(self.parents[1])) {
            // dB = G^T * A
            Mat gb(bv.r, bv.c);
            kernels::matmul_tn(self.grad.d.data(), av.d.data(), gb.d.data(), av.r, bv.r, av.c);
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += gb[i];
        }
    });
}

Var matmul_tn(const Var& a, const Var& b) {
    shape_check(a.rows() == b.rows(), "matmul_tn");
    Mat out(a.cols(), b.cols());
    kernels::matmul_tn(a.val().d.data(), b.val().d.data(), out.d.data(), a.rows(), a.cols(), b.cols());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const Mat& av = self.parents[0]->val;
        const Mat& bv = self.parents[1]->val;
        if (wants(self.parents[0])) {
            // dA = B * G^T
            Mat ga(av.r, av.c);
            kernels::matmul_nt(bv.d.data(), self.grad.d.data(), ga.d.data(), bv.r, bv.c, self.grad.r);
            // matmul_nt computed B(bv.r x bv.c) * G^T? G is (a.c x b.c); need dA(n x m) = B(n x k) * G^T(k x m)
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += ga[i];
        }
        if (wants(self.parents[1])) {
            // dB = A * G
            Mat gb(bv.r, bv.c);
            kernels::matmul(av.d.data(), self.grad.d.data(), gb.d.data(), av.r, av.c, self.grad.c);
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t i = 0; i < g.size(); ++i) g[i] += gb[i];
        }
    });
}

Var softmax_rows(const Var& a) {
    Mat out = a.val();
    for (int64_t i = 0; i < out.r; ++i) {
        double mx = -1e300;
        for (int64_t j = 0; j < out.c; ++j) mx = std::max(mx, out.at(i, j));
        double z = 0.0;
        for (int64_t j = 0; j < out.c; ++j) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            z += out.at(i, j);
        }
        for (int64_t j = 0; j < out.c; ++j) out.at(i, j) /= z;
    }
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        for (int64_t i = 0; i < y.r; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < y.c; ++j) dot += self.grad.at(i, j) * y.at(i, j);
            for (int64_t j = 0; j < y.c; ++j) g.at(i, j) += y.at(i, j) * (self.grad.at(i, j) - dot);
        }
    });
}

Var softmax_col(const Var& a) {
    shape_check(a.cols() == 1, "softmax_col");
    Mat out = a.val();
    double mx = -1e300;
    for (int64_t i = 0; i < out.r; ++i) mx = std::max(mx, out[i]);
    double z = 0.0;
    for (int64_t i = 0; i < out.r; ++i) {
        out[i] = std::exp(out[i] - mx);
        z += out[i];
    }
    for (int64_t i = 0; i < out.r; ++i) out[i] /= z;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& y = self.val;
        double dot = 0.0;
        for (int64_t i = 0; i < y.r; ++i) dot += self.grad[i] * y[i];
        for (int64_t i = 0; i < y.r; ++i) g[i] += y[i] * (self.grad[i] - dot);
    });
}

Var sum_all(const Var& a) {
    Mat out(1, 1);
    for (double v : a.val().d) out[0] += v;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
    });
}

Var mean_all(const Var& a) {
    double n = static_cast<double>(a.val().size());
    Mat out(1, 1);
    for (double v : a.val().d) out[0] += v;
    out[0] /= n;
    return make_node(std::move(out), {a}, [n](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] / n;
    });
}

Var row_sums(const Var& a) {
    Mat out(a.rows(), 1);
    for (int64_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < a.cols(); ++j) acc += a.val().at(i, j);
        out[i] = acc;
    }
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.r; ++i)
            for (int64_t j = 0; j < g.c; ++j) g.at(i, j) += self.grad[i];
    });
}

Var col_sums(const Var& a) {
    Mat out(1, a.cols());
    for (int64_t i = 0; i < a.rows(); ++i)
        for (int64_t j = 0; j < a.cols(); ++j) out[j] += a.val().at(i, j);
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.r; ++i)
            for (int64_t j = 0; j < g.c; ++j) g.at(i, j) += self.grad[j];
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    check_config(!parts.empty(), "concat_cols: empty input");
    int64_t rows = parts[0].rows(), cols = 0;
    for (const auto& p : parts) {
        shape_check(p.rows() == rows, "concat_cols");
        cols += p.cols();
    }
    Mat out(rows, cols);
    int64_t off = 0;
    for (const auto& p : parts) {
        for (int64_t i = 0; i < rows; ++i)
            for (int64_t j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.val().at(i, j);
        off += p.cols();
    }
    return make_node(std::move(out), parts, [](Node& self) {
        int64_t off = 0;
        for (auto& p : self.parents) {
            if (wants(p)) {
                Mat& g = grad_buf(*p);
                for (int64_t i = 0; i < g.r; ++i)
                    for (int64_t j = 0; j < g.c; ++j) g.at(i, j) += self.grad.at(i, off + j);
            }
            off += p->val.c;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    check_config(!parts.empty(), "concat_rows: empty input");
    int64_t cols = parts[0].cols(), rows = 0;
    for (const auto& p : parts) {
        shape_check(p.cols() == cols, "concat_rows");
        rows += p.rows();
    }
    Mat out(rows, cols);
    int64_t off = 0;
    for (const auto& p : parts) {
        for (int64_t i = 0; i < p.rows(); ++i)
            for (int64_t j = 0; j < cols; ++j) out.at(off + i, j) = p.val().at(i, j);
        off += p.rows();
    }
    return make_node(std::move(out), parts, [](Node& self) {
        int64_t off = 0;
        for (auto& p : self.parents) {
            if (wants(p)) {
                Mat& g = grad_buf(*p);
                for (int64_t i = 0; i < g.r; ++i)
                    for (int64_t j = 0; j < g.c; ++j) g.at(i, j) += self.grad.at(off + i, j);
            }
            off += p->val.r;
        }
    });
}

Var slice_cols(const Var& a, int64_t lo, int64_t len) {
    shape_check(lo >= 0 && lo + len <= a.cols(), "slice_cols");
    Mat out(a.rows(), len);
    for (int64_t i = 0; i < a.rows(); ++i)
        for (int64_t j = 0; j < len; ++j) out.at(i, j) = a.val().at(i, lo + j);
    return make_node(std::move(out), {a}, [lo, len](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < self.val.r; ++i)
            for (int64_t j = 0; j < len; ++j) g.at(i, lo + j) += self.grad.at(i, j);
    });
}

Var gather_rows(const Var& a, std::vector<int64_t> idx) {
    Mat out(static_cast<int64_t>(idx.size()), a.cols());
    for (size_t i = 0; i < idx.size(); ++i) {
        shape_check(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows");
        for (int64_t j = 0; j < a.cols(); ++j) out.at(static_cast<int64_t>(i), j) = a.val().at(idx[i], j);
    }
    return make_node(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (size_t i = 0; i < idx.size(); ++i)
            for (int64_t j = 0; j < g.c; ++j) g.at(idx[i], j) += self.grad.at(static_cast<int64_t>(i), j);
    });
}

Var sum_groups(const Var& a, std::vector<int64_t> group_of, int64_t n_groups) {
    shape_check(a.cols() == 1 && static_cast<int64_t>(group_of.size()) == a.rows(), "sum_groups");
    Mat out(n_groups, 1);
    for (int64_t i = 0; i < a.rows(); ++i) out[group_of[static_cast<size_t>(i)]] += a.val()[i];
    return make_node(std::move(out), {a}, [group_of = std::move(group_of)](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t i = 0; i < g.r; ++i) g[i] += self.grad[group_of[static_cast<size_t>(i)]];
    });
}

Var sqnorm_rows(const Var& a) {
    Mat out(a.rows(), 1);
    for (int64_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < a.cols(); ++j) {
            double v = a.val().at(i, j);
            acc += v * v;
        }
        out[i] = acc;
    }
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        const Mat& x = self.parents[0]->val;
        for (int64_t i = 0; i < x.r; ++i)
            for (int64_t j = 0; j < x.c; ++j) g.at(i, j) += 2.0 * x.at(i, j) * self.grad[i];
    });
}

Var outer_sum(const Var& u, const Var& v) {
    shape_check(u.cols() == 1 && v.cols() == 1, "outer_sum");
    Mat out(u.rows(), v.rows());
    for (int64_t i = 0; i < u.rows(); ++i)
        for (int64_t j = 0; j < v.rows(); ++j) out.at(i, j) = u.val()[i] + v.val()[j];
    return make_node(std::move(out), {u, v}, [](Node& self) {
        if (wants(self.parents[0])) {
            Mat& g = grad_buf(*self.parents[0]);
            for (int64_t i = 0; i < self.val.r; ++i) {
                double acc = 0.0;
                for (int64_t j = 0; j < self.val.c; ++j) acc += self.grad.at(i, j);
                g[i] += acc;
            }
        }
        if (wants(self.parents[1])) {
            Mat& g = grad_buf(*self.parents[1]);
            for (int64_t j = 0; j < self.val.c; ++j) {
                double acc = 0.0;
                for (int64_t i = 0; i < self.val.r; ++i) acc += self.grad.at(i, j);
                g[j] += acc;
            }
        }
    });
}

Var mean_of(const std::vector<Var>& parts) {
    check_config(!parts.empty(), "mean_of: empty input");
    Var acc = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
    return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

std::vector<double> cat_probs(const Mat& logits, const std::vector<char>& mask) {
    check_config(logits.r == 1 && logits.c == static_cast<int64_t>(mask.size()), "cat_probs shape");
    double mx = -1e300;
    for (int64_t j = 0; j < logits.c; ++j)
        if (mask[static_cast<size_t>(j)]) mx = std::max(mx, logits[j]);
    double z = 0.0;
    std::vector<double> p(static_cast<size_t>(logits.c), 0.0);
    for (int64_t j = 0; j < logits.c; ++j) {
        if (!mask[static_cast<size_t>(j)]) continue;
        p[static_cast<size_t>(j)] = std::exp(logits[j] - mx);
        z += p[static_cast<size_t>(j)];
    }
    for (auto& v : p) v /= z;
    return p;
}

Var cat_logprob(const Var& logits, const std::vector<char>& mask, int64_t k) {
    check_config(k >= 0 && k < logits.cols() && mask[static_cast<size_t>(k)], "cat_logprob: invalid or masked index");
    auto p = cat_probs(logits.val(), mask);
    Mat out(1, 1);
    out[0] = std::log(std::max(p[static_cast<size_t>(k)], 1e-300));
    return make_node(std::move(out), {logits}, [mask, k, p = std::move(p)](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t j = 0; j < g.c; ++j) {
            if (!mask[static_cast<size_t>(j)]) continue;
            double onehot = (j == k) ? 1.0 : 0.0;
            g[j] += self.grad[0] * (onehot - p[static_cast<size_t>(j)]);
        }
    });
}

Var cat_entropy(const Var& logits, const std::vector<char>& mask) {
    auto p = cat_probs(logits.val(), mask);
    double h = 0.0;
    for (size_t j = 0; j < p.size(); ++j)
        if (mask[j] && p[j] > 0.0) h -= p[j] * std::log(p[j]);
    Mat out(1, 1);
    out[0] = h;
    return make_node(std::move(out), {logits}, [mask, p = std::move(p), h](Node& self) {
        if (!wants(self.parents[0])) return;
        Mat& g = grad_buf(*self.parents[0]);
        for (int64_t j = 0; j < g.c; ++j) {
            if (!mask[static_cast<size_t>(j)] || p[static_cast<size_t>(j)] <= 0.0) continue;
            g[j] += self.grad[0] * (-p[static_cast<size_t>(j)] * (std::log(p[static_cast<size_t>(j)]) + h));
        }
    });
}

void backward(const Var& root) {
    check_config(root.defined() && root.val().size() == 1, "backward: root must be a 1x1 scalar");
    // Collect the reachable subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.node.get()};
    seen.insert(root.node.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    // Node ids increase monotonically with creation, so descending id order is
    // a reverse topological order.
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
    grad_buf(*root.node)[0] = 1.0;
    for (Node* n : order) {
        if (!n->back || !n->grad_init || !n->needs_grad) continue;
        n->back(*n);
    }
}

} // namespace tpad::ad
