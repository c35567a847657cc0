#pragma once

#include <cstddef>
#include <vector>

#include "ncce/tensor.hpp"

namespace ncce {

// Adam with linear learning-rate warm-up and decoupled (AdamW-style) weight
// decay. Warm-up covers `warmup_fraction` of `total_steps`; after that the
// rate stays at `lr`.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double warmup_fraction = 0.0;
    std::size_t total_steps = 0;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {
        warmup_steps_ = static_cast<std::size_t>(cfg.warmup_fraction *
                                                 static_cast<double>(cfg.total_steps));
    }

    // Effective rate the NEXT step will use (1-based step index t).
    double lr_at(std::size_t t) const {
        if (warmup_steps_ > 0 && t <= warmup_steps_)
            return cfg_.lr * static_cast<double>(t) / static_cast<double>(warmup_steps_);
        return cfg_.lr;
    }

    std::size_t step_count() const { return step_; }

    // One update over aligned parameter/gradient lists. Moment buffers are
    // created to match shapes on first use.
    void step(std::vector<Tensor*> params, std::vector<const Tensor*> grads) {
        if (params.size() != grads.size()) throw error("adam: param/grad count mismatch");
        if (m_.empty()) {
            for (Tensor* p : params) {
                m_.emplace_back(p->rows, p->cols);
                v_.emplace_back(p->rows, p->cols);
            }
        }
        if (m_.size() != params.size()) throw error("adam: parameter set changed between steps");
        ++step_;
        double lr = lr_at(step_);
        double t = static_cast<double>(step_);
        double bc1 = 1.0 - std::pow(cfg_.beta1, t);
        double bc2 = 1.0 - std::pow(cfg_.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = *grads[i];
            if (!p.same_shape(g))
                throw shape_error("adam: grad " + g.shape_str() + " vs param " + p.shape_str());
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                m.data[k] = cfg_.beta1 * m.data[k] + (1.0 - cfg_.beta1) * g.data[k];
                v.data[k] = cfg_.beta2 * v.data[k] + (1.0 - cfg_.beta2) * g.data[k] * g.data[k];
                double mhat = m.data[k] / bc1;
                double vhat = v.data[k] / bc2;
                p.data[k] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                   cfg_.weight_decay * p.data[k]);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::size_t warmup_steps_ = 0;
    std::size_t step_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

// Scales gradients in place so their global L2 norm is at most `max_norm`.
// Returns the pre-clip norm.
inline double clip_global_norm(std::vector<Tensor*> grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor* g : grads)
        for (double v : g->data) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (Tensor* g : grads)
            for (double& v : g->data) v *= s;
    }
    return norm;
}

}  // namespace ncce
