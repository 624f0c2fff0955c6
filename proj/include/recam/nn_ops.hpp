#pragma once

#include <cmath>

#include "recam/types.hpp"

// Dense kernels shared by the reference encoder and the scoring head. Rows are
// sequence positions; parameters use the x * W (in x out) convention.
namespace recam::nn {

/// Numerically stable softmax of a vector expression.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    VectorX<Scalar> p = (logits.array() - logits.maxCoeff()).exp().matrix();
    p /= p.sum();
    return p;
}

/// Row-wise softmax in place.
template <typename Derived>
void softmax_rows(Eigen::MatrixBase<Derived>& scores) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        auto row = scores.row(r);
        row = (row.array() - row.maxCoeff()).exp().matrix();
        row /= row.sum();
    }
}

template <typename Scalar>
struct LayerNormCache {
    MatrixX<Scalar> normalized;  // (x - mean) / std
    VectorX<Scalar> inv_std;
};

/// y = normalized(x) * gamma + beta, per row.
template <typename Scalar>
MatrixX<Scalar> layer_norm(const MatrixX<Scalar>& x, const MatrixX<Scalar>& gamma, const MatrixX<Scalar>& beta,
                           Scalar eps, LayerNormCache<Scalar>& cache) {
    const auto cols = static_cast<Scalar>(x.cols());
    cache.normalized.resize(x.rows(), x.cols());
    cache.inv_std.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Scalar mean = x.row(r).sum() / cols;
        auto centered = (x.row(r).array() - mean).matrix();
        const Scalar var = centered.squaredNorm() / cols;
        cache.inv_std(r) = Scalar(1) / std::sqrt(var + eps);
        cache.normalized.row(r) = centered * cache.inv_std(r);
    }
    MatrixX<Scalar> y = cache.normalized.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    return y;
}

/// Returns dL/dx; accumulates into d_gamma and d_beta.
template <typename Scalar>
MatrixX<Scalar> layer_norm_backward(const MatrixX<Scalar>& dy, const LayerNormCache<Scalar>& cache,
                                    const MatrixX<Scalar>& gamma, MatrixX<Scalar>& d_gamma,
                                    MatrixX<Scalar>& d_beta) {
    d_gamma.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    d_beta.row(0) += dy.colwise().sum();
    const MatrixX<Scalar> dxhat = dy.array().rowwise() * gamma.row(0).array();
    const auto cols = static_cast<Scalar>(dy.cols());
    MatrixX<Scalar> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const Scalar mean_d = dxhat.row(r).sum() / cols;
        const Scalar mean_dx = dxhat.row(r).dot(cache.normalized.row(r)) / cols;
        dx.row(r) = cache.inv_std(r) *
                    (dxhat.row(r).array() - mean_d - cache.normalized.row(r).array() * mean_dx).matrix();
    }
    return dx;
}

// tanh approximation of GELU.
template <typename Scalar>
Scalar gelu_scalar(Scalar x) {
    constexpr Scalar k = Scalar(0.7978845608028654);  // sqrt(2/pi)
    return Scalar(0.5) * x * (Scalar(1) + std::tanh(k * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu_grad_scalar(Scalar x) {
    constexpr Scalar k = Scalar(0.7978845608028654);
    const Scalar inner = k * (x + Scalar(0.044715) * x * x * x);
    const Scalar t = std::tanh(inner);
    const Scalar d_inner = k * (Scalar(1) + Scalar(3) * Scalar(0.044715) * x * x);
    return Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * x * (Scalar(1) - t * t) * d_inner;
}

template <typename Derived>
auto gelu(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    return x.unaryExpr([](Scalar v) { return gelu_scalar(v); });
}

template <typename Derived>
auto gelu_grad(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    return x.unaryExpr([](Scalar v) { return gelu_grad_scalar(v); });
}

/// Given softmax output `p` and upstream gradient `dp` (both rows), the
/// gradient with respect to the softmax input.
template <typename Scalar>
MatrixX<Scalar> softmax_rows_backward(const MatrixX<Scalar>& p, const MatrixX<Scalar>& dp) {
    const VectorX<Scalar> dots = (p.array() * dp.array()).rowwise().sum();
    return (p.array() * (dp.colwise() - dots).array()).matrix();
}

}  // namespace recam::nn
