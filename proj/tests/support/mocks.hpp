#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "recam/encoder.hpp"
#include "recam/nn_ops.hpp"
#include "recam/tokenizer.hpp"

namespace recam::testing {

/// Masked-LM mock: the distribution for an instance is scripted by id, with a
/// fallback used for unknown ids. Embeddings are a fixed table.
class ScriptedMlm final : public EncoderModel {
public:
    ScriptedMlm(const Tokenizer& tokenizer, Matrix embeddings)
        : tokenizer_(tokenizer), embeddings_(std::move(embeddings)) {
        fallback_ = Vector::Constant(static_cast<Eigen::Index>(tokenizer.vocab_size()),
                                     1.0 / static_cast<double>(tokenizer.vocab_size()));
    }

    explicit ScriptedMlm(const Tokenizer& tokenizer, int dim = 4)
        : ScriptedMlm(tokenizer, Matrix::Identity(static_cast<Eigen::Index>(tokenizer.vocab_size()), dim)) {}

    /// Puts `mass` on each listed word (by surface) and spreads the rest uniformly.
    static Vector peaked(const Tokenizer& tokenizer, const std::map<std::string, double>& mass) {
        const auto v = static_cast<Eigen::Index>(tokenizer.vocab_size());
        double used = 0.0;
        for (const auto& [w, m] : mass) used += m;
        Vector p = Vector::Constant(v, (1.0 - used) / static_cast<double>(v - static_cast<Eigen::Index>(mass.size())));
        for (const auto& [w, m] : mass) {
            const auto id = tokenizer.token_to_id(w);
            if (id < 0) throw std::runtime_error("peaked: unknown word " + w);
            p(id) = m;
        }
        return p;
    }

    void script(const std::string& instance_id, Vector probs) { scripted_[instance_id] = std::move(probs); }
    void set_fallback(Vector probs) { fallback_ = std::move(probs); }
    /// Computes the distribution from the probe input itself.
    void set_rule(std::function<Vector(const EncodedInput&)> rule) { rule_ = std::move(rule); }
    Matrix& embeddings() { return embeddings_; }

    std::size_t vocab_size() const override { return tokenizer_.vocab_size(); }
    int dim() const override { return static_cast<int>(embeddings_.cols()); }
    int max_positions() const override { return 4096; }
    TokenId mask_token_id() const override { return tokenizer_.specials().mask; }

    PooledVector encode(const EncodedInput& input) const override {
        check_tokens(input.token_ids);
        return embeddings_.row(input.token_ids.front()).transpose();
    }

    Vector mlm_distribution(const EncodedInput& input) const override {
        check_tokens(input.token_ids);
        check_mask(input, mask_token_id());
        if (rule_) return rule_(input);
        auto it = scripted_.find(input.instance_id);
        return it == scripted_.end() ? fallback_ : it->second;
    }

    Vector token_embedding(TokenId id) const override {
        if (id < 0 || id >= embeddings_.rows()) throw Error(ErrorKind::InvalidArgument, "token id out of range");
        return embeddings_.row(id).transpose();
    }

private:
    const Tokenizer& tokenizer_;
    Matrix embeddings_;
    Vector fallback_;
    std::map<std::string, Vector> scripted_;
    std::function<Vector(const EncodedInput&)> rule_;
};

/// Returns a one-dimensional pooled vector equal to a scripted logit for
/// (candidate, chunk); pair with a head of weight 1 and bias 0.
class LogitMockEncoder final : public EncoderModel {
public:
    using Rule = std::function<double(const EncodedInput&)>;

    LogitMockEncoder(std::size_t vocab, Rule rule) : vocab_(vocab), rule_(std::move(rule)) {}

    std::size_t vocab_size() const override { return vocab_; }
    int dim() const override { return 1; }
    int max_positions() const override { return 4096; }
    TokenId mask_token_id() const override { return 3; }
    PooledVector encode(const EncodedInput& input) const override {
        check_tokens(input.token_ids);
        return Vector::Constant(1, rule_(input));
    }
    Vector mlm_distribution(const EncodedInput&) const override {
        throw Error(ErrorKind::InvalidArgument, "logit mock has no masked-LM head");
    }
    Vector token_embedding(TokenId) const override { return Vector::Zero(1); }

private:
    std::size_t vocab_;
    Rule rule_;
};

struct LinearCache final : ForwardCache {
    std::vector<TokenId> ids;
};

/// Linear bag-of-embeddings encoder: the CLS row is the mean embedding of all
/// tokens, every other row is that token's embedding.
class LinearBagEncoder final : public TrainableEncoder {
public:
    LinearBagEncoder(int vocab, int dim, std::uint64_t seed) : embed_("linear.embed", Matrix(vocab, dim)) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 0.5);
        for (Eigen::Index i = 0; i < embed_.value.size(); ++i) embed_.value.data()[i] = normal(rng);
    }

    std::size_t vocab_size() const override { return static_cast<std::size_t>(embed_.value.rows()); }
    int dim() const override { return static_cast<int>(embed_.value.cols()); }
    int max_positions() const override { return 4096; }
    TokenId mask_token_id() const override { return 3; }

    ForwardPass forward(std::span<const TokenId> ids) const override {
        check_tokens(ids);
        ForwardPass pass;
        pass.hidden.resize(static_cast<Eigen::Index>(ids.size()), dim());
        RowVector mean = RowVector::Zero(dim());
        for (std::size_t t = 0; t < ids.size(); ++t) {
            pass.hidden.row(static_cast<Eigen::Index>(t)) = embed_.value.row(ids[t]);
            mean += embed_.value.row(ids[t]);
        }
        pass.hidden.row(0) = mean / static_cast<double>(ids.size());
        auto cache = std::make_unique<LinearCache>();
        cache->ids.assign(ids.begin(), ids.end());
        pass.cache = std::move(cache);
        return pass;
    }

    void backward(const ForwardPass& pass, const Matrix& d_hidden) override {
        const auto& ids = dynamic_cast<const LinearCache&>(*pass.cache).ids;
        const double inv = 1.0 / static_cast<double>(ids.size());
        for (std::size_t t = 0; t < ids.size(); ++t) {
            embed_.grad.row(ids[t]) += inv * d_hidden.row(0);
            if (t > 0) embed_.grad.row(ids[t]) += d_hidden.row(static_cast<Eigen::Index>(t));
        }
    }

    Vector token_embedding(TokenId id) const override { return embed_.value.row(id).transpose(); }
    std::vector<Parameter<Real>*> parameters() override { return {&embed_}; }
    using TrainableEncoder::parameters;

private:
    Parameter<Real> embed_;
};

}  // namespace recam::testing
