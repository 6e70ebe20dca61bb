#pragma once

#include <cmath>

#include "gms/layers.hpp"

namespace gms {

// lr(t) = eta_min + 0.5*(lr_init - eta_min)*(1 + cos(pi*t/T)), updated once
// per epoch.
struct CosineSchedule {
    double lr_init = 2e-3;
    double eta_min = 0.0;
    int total_epochs = 1000;

    double lr(int t) const {
        if (t < 0 || t > total_epochs)
            throw UsageError(strfmt("cosine_lr: epoch %d outside [0,%d]", t, total_epochs));
        return eta_min +
               0.5 * (lr_init - eta_min) * (1.0 + std::cos(3.14159265358979323846 * t / total_epochs));
    }
};

// AdamW with decoupled weight decay:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2  (bias-corrected)
//   theta <- theta - lr*(mhat/(sqrt(vhat)+eps) + wd*theta)
// Only registered tensors are ever touched; frozen parameters stay out of
// the registration set entirely.
template <typename T>
class AdamW {
  public:
    struct Hyper {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW() = default;

    explicit AdamW(ParamList<T> params, Hyper hp = {}) : hp_(hp), params_(std::move(params)) {
        for (auto& [name, p] : params_) {
            if (!p.requires_grad())
                throw UsageError("adamw: parameter '" + name + "' does not require gradients");
            m_.push_back(Tensor<T>::zeros(p.shape()));
            v_.push_back(Tensor<T>::zeros(p.shape()));
        }
    }

    void step(const GradMap<T>& grads, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& [name, p] = params_[i];
            if (!grads.has(p))
                throw UsageError("adamw: no gradient present for trainable parameter '" + name + "'");
            const std::vector<T>& g = grads.grad_values(p);
            if (g.size() != p.numel())
                throw DimensionError("adamw: gradient size mismatch for parameter '" + name + "'");
            T* th = p.data();
            T* m = m_[i].data();
            T* v = v_[i].data();
            for (size_t j = 0; j < g.size(); ++j) {
                const double gj = static_cast<double>(g[j]);
                const double mj = hp_.beta1 * static_cast<double>(m[j]) + (1.0 - hp_.beta1) * gj;
                const double vj = hp_.beta2 * static_cast<double>(v[j]) + (1.0 - hp_.beta2) * gj * gj;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                const double update =
                    lr * (mhat / (std::sqrt(vhat) + hp_.eps) + hp_.weight_decay * static_cast<double>(th[j]));
                th[j] = static_cast<T>(static_cast<double>(th[j]) - update);
            }
        }
    }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    const Hyper& hyper() const { return hp_; }
    const ParamList<T>& params() const { return params_; }

    // moment tensors exposed for checkpointing
    ParamList<T> named_state() const {
        ParamList<T> out;
        for (size_t i = 0; i < params_.size(); ++i) {
            out.emplace_back("opt.m." + params_[i].first, m_[i]);
            out.emplace_back("opt.v." + params_[i].first, v_[i]);
        }
        return out;
    }

  private:
    Hyper hp_;
    ParamList<T> params_;
    std::vector<Tensor<T>> m_, v_;
    int64_t t_ = 0;
};

}  // namespace gms
