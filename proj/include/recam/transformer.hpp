#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "recam/encoder.hpp"
#include "recam/nn_ops.hpp"

namespace recam {

struct ReferenceEncoderConfig {
    int vocab_size = 0;
    int layers = 2;
    int heads = 4;
    int dim = 64;
    int ff_dim = 256;
    int max_positions = 256;
    std::uint64_t seed = 13;
    double init_std = 0.02;
    double layer_norm_eps = 1e-5;
    TokenId mask_token_id = 3;

    /// Throws on non-positive sizes or dim not divisible by heads.
    void validate() const;
    bool operator==(const ReferenceEncoderConfig&) const = default;
};

/// Pre-norm transformer encoder with hand-derived backward pass.
///
/// Layer: x += Attn(LN1(x)); x += FFN(LN2(x)); hidden = LNf(x). Attention is
/// full bidirectional over a single unpadded sequence, FFN uses tanh-GELU,
/// and there is no dropout, so forward() is a pure function of the weights.
/// The masked-LM head is a dense projection of the final hidden state.
template <typename Scalar>
class TransformerEncoder {
public:
    using Mat = MatrixX<Scalar>;
    using Vec = VectorX<Scalar>;

    struct LayerParams {
        Parameter<Scalar> ln1_gamma, ln1_beta;
        Parameter<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
        Parameter<Scalar> ln2_gamma, ln2_beta;
        Parameter<Scalar> w1, b1, w2, b2;
    };

    struct LayerCache {
        Mat input;
        nn::LayerNormCache<Scalar> ln1;
        Mat h1, q, k, v;
        std::vector<Mat> attention;  // one L x L matrix per head
        Mat context;
        Mat mid;
        nn::LayerNormCache<Scalar> ln2;
        Mat h2, pre_activation, activation;
    };

    struct Cache {
        std::vector<TokenId> ids;
        std::vector<LayerCache> layers;
        Mat final_input;
        nn::LayerNormCache<Scalar> final_ln;
    };

    explicit TransformerEncoder(const ReferenceEncoderConfig& config) : config_(config) {
        config_.validate();
        const int d = config_.dim;
        const int f = config_.ff_dim;
        const int vocab = config_.vocab_size;
        std::mt19937_64 rng(config_.seed);
        std::normal_distribution<double> normal(0.0, config_.init_std);
        auto random = [&](const std::string& name, int rows, int cols) {
            Mat m(rows, cols);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(normal(rng));
            return Parameter<Scalar>(name, std::move(m));
        };
        auto constant = [](const std::string& name, int cols, Scalar value) {
            return Parameter<Scalar>(name, Mat::Constant(1, cols, value));
        };

        token_embedding_ = random("embed.token", vocab, d);
        position_embedding_ = random("embed.position", config_.max_positions, d);
        layers_.reserve(static_cast<std::size_t>(config_.layers));
        for (int l = 0; l < config_.layers; ++l) {
            const auto p = "layer" + std::to_string(l) + ".";
            LayerParams layer{
                constant(p + "ln1.gamma", d, 1), constant(p + "ln1.beta", d, 0),
                random(p + "attn.wq", d, d),     constant(p + "attn.bq", d, 0),
                random(p + "attn.wk", d, d),     constant(p + "attn.bk", d, 0),
                random(p + "attn.wv", d, d),     constant(p + "attn.bv", d, 0),
                random(p + "attn.wo", d, d),     constant(p + "attn.bo", d, 0),
                constant(p + "ln2.gamma", d, 1), constant(p + "ln2.beta", d, 0),
                random(p + "ffn.w1", d, f),      constant(p + "ffn.b1", f, 0),
                random(p + "ffn.w2", f, d),      constant(p + "ffn.b2", d, 0),
            };
            layers_.push_back(std::move(layer));
        }
        final_gamma_ = constant("final_ln.gamma", d, 1);
        final_beta_ = constant("final_ln.beta", d, 0);
        mlm_weight_ = random("mlm.weight", d, vocab);
        mlm_bias_ = constant("mlm.bias", vocab, 0);
    }

    const ReferenceEncoderConfig& config() const { return config_; }

    std::vector<Parameter<Scalar>*> parameters() {
        std::vector<Parameter<Scalar>*> out{&token_embedding_, &position_embedding_};
        for (auto& layer : layers_) {
            for (auto* p : {&layer.ln1_gamma, &layer.ln1_beta, &layer.wq, &layer.bq, &layer.wk, &layer.bk,
                            &layer.wv, &layer.bv, &layer.wo, &layer.bo, &layer.ln2_gamma, &layer.ln2_beta,
                            &layer.w1, &layer.b1, &layer.w2, &layer.b2}) {
                out.push_back(p);
            }
        }
        out.insert(out.end(), {&final_gamma_, &final_beta_, &mlm_weight_, &mlm_bias_});
        return out;
    }

    /// Final hidden states (L x d). Ids must already be validated.
    Mat forward(std::span<const TokenId> ids, Cache& cache) const {
        const auto len = static_cast<Eigen::Index>(ids.size());
        const int d = config_.dim;
        const int heads = config_.heads;
        const int head_dim = d / heads;
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
        const auto eps = static_cast<Scalar>(config_.layer_norm_eps);

        cache.ids.assign(ids.begin(), ids.end());
        cache.layers.resize(layers_.size());

        Mat x(len, d);
        for (Eigen::Index t = 0; t < len; ++t) {
            x.row(t) = token_embedding_.value.row(ids[static_cast<std::size_t>(t)]) + position_embedding_.value.row(t);
        }

        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& p = layers_[l];
            auto& c = cache.layers[l];
            c.input = x;
            c.h1 = nn::layer_norm(x, p.ln1_gamma.value, p.ln1_beta.value, eps, c.ln1);
            c.q = (c.h1 * p.wq.value).rowwise() + p.bq.value.row(0);
            c.k = (c.h1 * p.wk.value).rowwise() + p.bk.value.row(0);
            c.v = (c.h1 * p.wv.value).rowwise() + p.bv.value.row(0);
            c.attention.resize(static_cast<std::size_t>(heads));
            c.context.resize(len, d);
            for (int h = 0; h < heads; ++h) {
                const auto cols = Eigen::seqN(h * head_dim, head_dim);
                Mat scores = scale * (c.q(Eigen::all, cols) * c.k(Eigen::all, cols).transpose());
                nn::softmax_rows(scores);
                c.context(Eigen::all, cols) = scores * c.v(Eigen::all, cols);
                c.attention[static_cast<std::size_t>(h)] = std::move(scores);
            }
            x += (c.context * p.wo.value).rowwise() + p.bo.value.row(0);
            c.mid = x;
            c.h2 = nn::layer_norm(x, p.ln2_gamma.value, p.ln2_beta.value, eps, c.ln2);
            c.pre_activation = (c.h2 * p.w1.value).rowwise() + p.b1.value.row(0);
            c.activation = nn::gelu(c.pre_activation);
            x += (c.activation * p.w2.value).rowwise() + p.b2.value.row(0);
        }
        cache.final_input = x;
        return nn::layer_norm(x, final_gamma_.value, final_beta_.value, eps, cache.final_ln);
    }

    /// Backpropagates dL/dhidden, accumulating parameter gradients.
    void backward(const Cache& cache, const Mat& d_hidden) {
        const int d = config_.dim;
        const int heads = config_.heads;
        const int head_dim = d / heads;
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

        Mat dx = nn::layer_norm_backward(d_hidden, cache.final_ln, final_gamma_.value, final_gamma_.grad,
                                         final_beta_.grad);
        for (std::size_t li = layers_.size(); li-- > 0;) {
            auto& p = layers_[li];
            const auto& c = cache.layers[li];

            // Feed-forward branch.
            p.w2.grad.noalias() += c.activation.transpose() * dx;
            p.b2.grad.row(0) += dx.colwise().sum();
            Mat d_act = dx * p.w2.value.transpose();
            Mat d_pre = d_act.cwiseProduct(nn::gelu_grad(c.pre_activation));
            p.w1.grad.noalias() += c.h2.transpose() * d_pre;
            p.b1.grad.row(0) += d_pre.colwise().sum();
            Mat d_h2 = d_pre * p.w1.value.transpose();
            dx += nn::layer_norm_backward(d_h2, c.ln2, p.ln2_gamma.value, p.ln2_gamma.grad, p.ln2_beta.grad);

            // Attention branch.
            p.wo.grad.noalias() += c.context.transpose() * dx;
            p.bo.grad.row(0) += dx.colwise().sum();
            Mat d_context = dx * p.wo.value.transpose();
            Mat dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
            for (int h = 0; h < heads; ++h) {
                const auto cols = Eigen::seqN(h * head_dim, head_dim);
                const auto& attn = c.attention[static_cast<std::size_t>(h)];
                Mat d_ctx_h = d_context(Eigen::all, cols);
                Mat d_attn = d_ctx_h * c.v(Eigen::all, cols).transpose();
                dv(Eigen::all, cols) = attn.transpose() * d_ctx_h;
                Mat d_scores = nn::softmax_rows_backward(attn, d_attn) * scale;
                dq(Eigen::all, cols) = d_scores * c.k(Eigen::all, cols);
                dk(Eigen::all, cols) = d_scores.transpose() * c.q(Eigen::all, cols);
            }
            p.wq.grad.noalias() += c.h1.transpose() * dq;
            p.bq.grad.row(0) += dq.colwise().sum();
            p.wk.grad.noalias() += c.h1.transpose() * dk;
            p.bk.grad.row(0) += dk.colwise().sum();
            p.wv.grad.noalias() += c.h1.transpose() * dv;
            p.bv.grad.row(0) += dv.colwise().sum();
            Mat d_h1 = dq * p.wq.value.transpose() + dk * p.wk.value.transpose() + dv * p.wv.value.transpose();
            dx += nn::layer_norm_backward(d_h1, c.ln1, p.ln1_gamma.value, p.ln1_gamma.grad, p.ln1_beta.grad);
        }

        for (Eigen::Index t = 0; t < dx.rows(); ++t) {
            token_embedding_.grad.row(cache.ids[static_cast<std::size_t>(t)]) += dx.row(t);
            position_embedding_.grad.row(t) += dx.row(t);
        }
    }

    Vec mlm_logits(const Mat& hidden, Eigen::Index position) const {
        return (hidden.row(position) * mlm_weight_.value + mlm_bias_.value.row(0)).transpose();
    }

    void mlm_backward(const Mat& hidden, Eigen::Index position, const Vec& d_logits, Mat& d_hidden) {
        mlm_weight_.grad.noalias() += hidden.row(position).transpose() * d_logits.transpose();
        mlm_bias_.grad.row(0) += d_logits.transpose();
        d_hidden.row(position) += (mlm_weight_.value * d_logits).transpose();
    }

    Vec token_embedding(TokenId id) const { return token_embedding_.value.row(id).transpose(); }

private:
    ReferenceEncoderConfig config_;
    Parameter<Scalar> token_embedding_;
    Parameter<Scalar> position_embedding_;
    std::vector<LayerParams> layers_;
    Parameter<Scalar> final_gamma_, final_beta_;
    Parameter<Scalar> mlm_weight_, mlm_bias_;
};

/// TrainableEncoder backed by TransformerEncoder<Real>.
class ReferenceEncoder final : public TrainableEncoder {
public:
    explicit ReferenceEncoder(const ReferenceEncoderConfig& config);

    const ReferenceEncoderConfig& config() const { return net_.config(); }

    std::size_t vocab_size() const override { return static_cast<std::size_t>(net_.config().vocab_size); }
    int dim() const override { return net_.config().dim; }
    int max_positions() const override { return net_.config().max_positions; }
    TokenId mask_token_id() const override { return net_.config().mask_token_id; }

    ForwardPass forward(std::span<const TokenId> ids) const override;
    void backward(const ForwardPass& pass, const Matrix& d_hidden) override;
    Vector mlm_logits(const ForwardPass& pass, int position) const override;
    void mlm_backward(const ForwardPass& pass, int position, const Vector& d_logits, Matrix& d_hidden) override;
    bool has_mlm_head() const override { return true; }

    Vector token_embedding(TokenId id) const override;
    std::vector<Parameter<Real>*> parameters() override { return net_.parameters(); }
    using TrainableEncoder::parameters;

private:
    TransformerEncoder<Real> net_;
};

extern template class TransformerEncoder<double>;

}  // namespace recam
