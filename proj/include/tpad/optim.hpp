#pragma once

#include <vector>

#include "tpad/autodiff.hpp"

namespace tpad::optim {

// Adam over a fixed list of parameter leaves. Parameters with no accumulated
// gradient this step are treated as zero-gradient. step() clears gradients.
class Adam {
public:
    Adam() = default;
    explicit Adam(std::vector<ad::Var> params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    int64_t step_count() const { return t_; }
    const std::vector<ad::Var>& params() const { return params_; }

private:
    std::vector<ad::Var> params_;
    std::vector<Mat> m_, v_;
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
};

} // namespace tpad::optim
