#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "recam/mcscorer.hpp"
#include "recam/tapt.hpp"
#include "recam/transformer.hpp"

namespace recam::testing {

struct GradSample {
    std::string parameter;
    Eigen::Index index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double relative_error = 0.0;
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double a, double n, double floor = 1e-6) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Compares analytic gradients of L = fine-tune loss(instance) + masked-LM
/// loss(example) against central differences on `count` coordinates drawn
/// from the entries the inputs actually reach.
inline std::vector<GradSample> check_gradients(ReferenceEncoder& encoder, ScoringHead& head,
                                               const Tokenizer& tokenizer, const Instance& instance,
                                               const MlmExample& example, const TrainConfig& config, int count,
                                               std::uint64_t seed, double h = 1e-5) {
    FineTuner tuner(encoder, head, tokenizer, config);
    auto params = tuner.parameters();
    for (auto* p : params) p->zero_grad();

    tuner.accumulate(instance);
    {
        const auto pass = encoder.forward(example.token_ids);
        Matrix d_hidden = Matrix::Zero(pass.hidden.rows(), pass.hidden.cols());
        const double m = static_cast<double>(example.mask_positions.size());
        for (std::size_t i = 0; i < example.mask_positions.size(); ++i) {
            const int pos = example.mask_positions[i];
            const auto logits = encoder.mlm_logits(pass, pos);
            Vector d = nn::softmax(logits);
            d(example.original_ids[i]) -= 1.0;
            encoder.mlm_backward(pass, pos, d / m, d_hidden);
        }
        encoder.backward(pass, d_hidden);
    }

    auto total_loss = [&] { return tuner.instance_loss(instance) + mlm_loss(encoder, example); };

    std::set<TokenId> used(example.token_ids.begin(), example.token_ids.end());
    std::size_t longest = example.token_ids.size();
    for (const auto& in : build_inputs(instance, tokenizer, config.max_len, config.stride)) {
        used.insert(in.token_ids.begin(), in.token_ids.end());
        longest = std::max(longest, in.token_ids.size());
    }

    struct Slot {
        Parameter<Real>* p;
        Eigen::Index index;
    };
    std::vector<Slot> slots;
    for (auto* p : params) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            const auto row = i / p->value.cols();
            if (p->name == "embed.token" && !used.count(static_cast<TokenId>(row))) continue;
            if (p->name == "embed.position" && row >= static_cast<Eigen::Index>(longest)) continue;
            slots.push_back({p, i});
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<Slot> chosen;
    std::sample(slots.begin(), slots.end(), std::back_inserter(chosen), count, rng);

    std::vector<GradSample> out;
    for (const auto& s : chosen) {
        double& v = s.p->value.data()[s.index];
        const double saved = v;
        v = saved + h;
        const double plus = total_loss();
        v = saved - h;
        const double minus = total_loss();
        v = saved;
        GradSample g;
        g.parameter = s.p->name;
        g.index = s.index;
        g.analytic = s.p->grad.data()[s.index];
        g.numeric = (plus - minus) / (2.0 * h);
        g.relative_error = relative_error(g.analytic, g.numeric);
        out.push_back(g);
    }
    return out;
}

}  // namespace recam::testing
