#pragma once

#include <cmath>
#include <vector>

#include "recam/encoder.hpp"

namespace recam {

struct AdamWConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. For step t with gradient g:
///   m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
///   m_hat = m / (1 - b1^t)         v_hat = v / (1 - b2^t)
///   theta = theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
template <typename Scalar>
class AdamW {
public:
    AdamW(std::vector<Parameter<Scalar>*> params, const AdamWConfig& config)
        : params_(std::move(params)), config_(config) {
        for (const auto* p : params_) {
            first_.push_back(MatrixX<Scalar>::Zero(p->value.rows(), p->value.cols()));
            second_.push_back(MatrixX<Scalar>::Zero(p->value.rows(), p->value.cols()));
        }
    }

    /// Applies one update using grad * grad_scale as the gradient.
    void step(Scalar grad_scale = Scalar(1)) {
        ++steps_;
        const auto lr = static_cast<Scalar>(config_.learning_rate);
        const auto b1 = static_cast<Scalar>(config_.beta1);
        const auto b2 = static_cast<Scalar>(config_.beta2);
        const auto eps = static_cast<Scalar>(config_.eps);
        const auto wd = static_cast<Scalar>(config_.weight_decay);
        const Scalar bias1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(steps_));
        const Scalar bias2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(steps_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            const auto g = (p.grad.array() * grad_scale).eval();
            first_[i].array() = b1 * first_[i].array() + (Scalar(1) - b1) * g;
            second_[i].array() = b2 * second_[i].array() + (Scalar(1) - b2) * g.square();
            const auto m_hat = first_[i].array() / bias1;
            const auto v_hat = second_[i].array() / bias2;
            p.value.array() -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * p.value.array());
        }
    }

    long steps() const { return steps_; }
    const AdamWConfig& config() const { return config_; }

private:
    std::vector<Parameter<Scalar>*> params_;
    AdamWConfig config_;
    std::vector<MatrixX<Scalar>> first_;
    std::vector<MatrixX<Scalar>> second_;
    long steps_ = 0;
};

}  // namespace recam
