#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "recam/textprep.hpp"
#include "recam/types.hpp"

namespace recam {

using PooledVector = Vector;

/// A named trainable tensor with its gradient accumulator.
template <typename Scalar>
struct Parameter {
    std::string name;
    MatrixX<Scalar> value;
    MatrixX<Scalar> grad;

    Parameter() = default;
    Parameter(std::string n, MatrixX<Scalar> v)
        : name(std::move(n)), value(std::move(v)), grad(MatrixX<Scalar>::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

/// Read-only encoder contract: CLS pooling, masked-LM distribution and
/// embedding lookup. Implementations must be safe for concurrent const calls.
class EncoderModel {
public:
    virtual ~EncoderModel() = default;

    virtual std::size_t vocab_size() const = 0;
    virtual int dim() const = 0;
    virtual int max_positions() const = 0;
    virtual TokenId mask_token_id() const = 0;

    /// Hidden state at the CLS position.
    virtual PooledVector encode(const EncodedInput& input) const = 0;
    /// Distribution over the vocabulary at input.mask_position.
    virtual Vector mlm_distribution(const EncodedInput& input) const = 0;
    virtual Vector token_embedding(TokenId id) const = 0;

    /// Throws on out-of-vocabulary ids or inputs longer than max_positions().
    void check_tokens(std::span<const TokenId> ids) const;
    /// Throws unless mask_position is set and points at `mask_id`.
    static void check_mask(const EncodedInput& input, TokenId mask_id);
};

struct ForwardCache {
    virtual ~ForwardCache() = default;
};

struct ForwardPass {
    Matrix hidden;  // final hidden states, one row per position
    std::unique_ptr<ForwardCache> cache;
};

/// Differentiable encoder. backward() and mlm_backward() accumulate into the
/// gradients of parameters(); callers zero them between updates.
class TrainableEncoder : public EncoderModel {
public:
    virtual ForwardPass forward(std::span<const TokenId> ids) const = 0;
    virtual void backward(const ForwardPass& pass, const Matrix& d_hidden) = 0;

    virtual Vector mlm_logits(const ForwardPass& pass, int position) const;
    /// Accumulates masked-LM head gradients and adds dL/dhidden into row `position` of d_hidden.
    virtual void mlm_backward(const ForwardPass& pass, int position, const Vector& d_logits, Matrix& d_hidden);
    virtual bool has_mlm_head() const { return false; }

    virtual std::vector<Parameter<Real>*> parameters() = 0;
    std::vector<const Parameter<Real>*> parameters() const;

    void zero_grad();
    std::size_t parameter_count() const;

    PooledVector encode(const EncodedInput& input) const override;
    Vector mlm_distribution(const EncodedInput& input) const override;
};

}  // namespace recam
