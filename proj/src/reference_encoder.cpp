#include <string>

#include "recam/nn_ops.hpp"
#include "recam/transformer.hpp"

namespace recam {

template class TransformerEncoder<double>;

void ReferenceEncoderConfig::validate() const {
    if (vocab_size <= 0 || layers <= 0 || heads <= 0 || dim <= 0 || ff_dim <= 0 || max_positions <= 0) {
        throw Error(ErrorKind::InvalidArgument, "reference encoder: sizes must all be positive");
    }
    if (dim % heads != 0) {
        throw Error(ErrorKind::InvalidArgument, "reference encoder: dim " + std::to_string(dim) +
                                                    " is not divisible by heads " + std::to_string(heads));
    }
    if (!(init_std > 0.0) || !(layer_norm_eps > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "reference encoder: init_std and layer_norm_eps must be positive");
    }
    if (mask_token_id < 0 || mask_token_id >= vocab_size) {
        throw Error(ErrorKind::InvalidArgument, "reference encoder: mask token id outside vocabulary");
    }
}

void EncoderModel::check_tokens(std::span<const TokenId> ids) const {
    if (ids.empty()) {
        throw Error(ErrorKind::InvalidArgument, "encoder: empty input");
    }
    if (static_cast<int>(ids.size()) > max_positions()) {
        throw Error(ErrorKind::InvalidArgument, "encoder: input of " + std::to_string(ids.size()) +
                                                    " tokens exceeds max positions " + std::to_string(max_positions()));
    }
    const auto vocab = static_cast<TokenId>(vocab_size());
    for (auto id : ids) {
        if (id < 0 || id >= vocab) {
            throw Error(ErrorKind::InvalidArgument, "encoder: token id " + std::to_string(id) +
                                                        " outside vocabulary of size " + std::to_string(vocab));
        }
    }
}

void EncoderModel::check_mask(const EncodedInput& input, TokenId mask_id) {
    if (!input.mask_position) {
        throw Error(ErrorKind::InvalidArgument, "mlm_distribution: input has no mask position");
    }
    const auto pos = *input.mask_position;
    if (pos < 0 || pos >= static_cast<int>(input.token_ids.size()) ||
        input.token_ids[static_cast<std::size_t>(pos)] != mask_id) {
        throw Error(ErrorKind::InvalidArgument, "mlm_distribution: mask position does not hold the MASK token");
    }
}

Vector TrainableEncoder::mlm_logits(const ForwardPass&, int) const {
    throw Error(ErrorKind::InvalidArgument, "encoder has no masked-LM head");
}

void TrainableEncoder::mlm_backward(const ForwardPass&, int, const Vector&, Matrix&) {
    throw Error(ErrorKind::InvalidArgument, "encoder has no masked-LM head");
}

std::vector<const Parameter<Real>*> TrainableEncoder::parameters() const {
    auto mutable_params = const_cast<TrainableEncoder*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

void TrainableEncoder::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

std::size_t TrainableEncoder::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
    return n;
}

PooledVector TrainableEncoder::encode(const EncodedInput& input) const {
    check_tokens(input.token_ids);
    const auto pass = forward(input.token_ids);
    return pass.hidden.row(0).transpose();
}

Vector TrainableEncoder::mlm_distribution(const EncodedInput& input) const {
    check_tokens(input.token_ids);
    check_mask(input, mask_token_id());
    const auto pass = forward(input.token_ids);
    return nn::softmax(mlm_logits(pass, *input.mask_position));
}

namespace {

struct ReferenceCache final : ForwardCache {
    TransformerEncoder<Real>::Cache cache;
};

const TransformerEncoder<Real>::Cache& unwrap(const ForwardPass& pass) {
    const auto* c = dynamic_cast<const ReferenceCache*>(pass.cache.get());
    if (!c) {
        throw Error(ErrorKind::InvalidArgument, "forward pass was not produced by this encoder");
    }
    return c->cache;
}

}  // namespace

ReferenceEncoder::ReferenceEncoder(const ReferenceEncoderConfig& config) : net_(config) {}

ForwardPass ReferenceEncoder::forward(std::span<const TokenId> ids) const {
    check_tokens(ids);
    auto cache = std::make_unique<ReferenceCache>();
    ForwardPass pass;
    pass.hidden = net_.forward(ids, cache->cache);
    pass.cache = std::move(cache);
    return pass;
}

void ReferenceEncoder::backward(const ForwardPass& pass, const Matrix& d_hidden) {
    net_.backward(unwrap(pass), d_hidden);
}

Vector ReferenceEncoder::mlm_logits(const ForwardPass& pass, int position) const {
    return net_.mlm_logits(pass.hidden, position);
}

void ReferenceEncoder::mlm_backward(const ForwardPass& pass, int position, const Vector& d_logits,
                                    Matrix& d_hidden) {
    net_.mlm_backward(pass.hidden, position, d_logits, d_hidden);
}

Vector ReferenceEncoder::token_embedding(TokenId id) const {
    if (id < 0 || id >= static_cast<TokenId>(vocab_size())) {
        throw Error(ErrorKind::InvalidArgument, "token_embedding: id " + std::to_string(id) + " outside vocabulary");
    }
    return net_.token_embedding(id);
}

}  // namespace recam
