#include "tpad/optim.hpp"

#include <cmath>

namespace tpad::optim {

Adam::Adam(std::vector<ad::Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.push_back(Mat::zeros(p.rows(), p.cols()));
        v_.push_back(Mat::zeros(p.rows(), p.cols()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& node = *params_[i].node;
        Mat& m = m_[i];
        Mat& v = v_[i];
        Mat& w = node.val;
        const bool has_g = node.grad_init;
        for (int64_t j = 0; j < w.size(); ++j) {
            const double g = has_g ? node.grad[j] : 0.0;
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        node.grad_init = false;
        node.grad = Mat();
    }
}

} // namespace tpad::optim
