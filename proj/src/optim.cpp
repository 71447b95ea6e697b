#include "uvmap/optim.hpp"

#include <cmath>

namespace uvmap {

Adam::Adam(std::vector<ParamTensor*> params, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(epsilon) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (ParamTensor* p : params_) {
        m_.emplace_back(p->data.rows(), p->data.cols());
        v_.emplace_back(p->data.rows(), p->data.cols());
    }
}

void Adam::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ParamTensor& p = *params_[i];
        double* w = p.data.data();
        double* g = p.grad.data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
            v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
            g[j] = 0.0;
        }
    }
}

Adam::State Adam::save_state() const { return State{m_, v_, t_}; }

void Adam::restore_state(const State& s) {
    if (s.m.size() != m_.size() || s.v.size() != v_.size())
        throw ArgumentError("Adam::restore_state: state does not match parameter set");
    m_ = s.m;
    v_ = s.v;
    t_ = s.t;
}

double cosine_lr(double lr_max, double lr_min, std::size_t step, std::size_t total) {
    if (total <= 1) return lr_max;
    const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(frac * M_PI));
}

}  // namespace uvmap
