#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "cola/data.hpp"
#include "cola/model.hpp"
#include "cola/objective.hpp"
#include "cola/random.hpp"

namespace cola::test {

inline Tensor random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    Tensor t(c, h, w);
    for (double& v : t.values()) v = uniform(rng, lo, hi);
    return t;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = uniform(rng, lo, hi);
    return v;
}

inline SaliencyMap random_mask(int h, int w, std::uint64_t seed, double p = 0.4) {
    std::mt19937_64 rng(seed);
    SaliencyMap m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = uniform(rng, 0.0, 1.0) < p ? 1.0 : 0.0;
    return m;
}

inline SaliencyMap random_map(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SaliencyMap m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = uniform(rng, 0.0, 1.0);
    return m;
}

inline DualModalSample random_sample(int size, std::uint64_t seed) {
    DualModalSample s;
    s.m1 = {random_tensor(3, size, size, mix_seed(seed, 1), 0.0, 1.0), ModalityTag::m1};
    s.m2 = {random_tensor(3, size, size, mix_seed(seed, 2), 0.0, 1.0), ModalityTag::m2};
    s.gt = random_mask(size, size, mix_seed(seed, 3));
    s.id = "rand_" + std::to_string(seed);
    return s;
}

/// Two-level model on 8x8 inputs, small enough for finite differences.
inline ModelConfig tiny_model_config() {
    ModelConfig c;
    c.encoder.widths = {4, 6};
    c.cbam_min_hidden = 2;
    c.embedder.dim = 32;
    c.image_size = 8;
    return c;
}

/// Loss-and-gradient closures over one sample for grad_check.
inline GradCheckResult pipeline_grad_check(ModelState& state, const DualModalSample& sample,
                                           std::span<Param* const> params, const GradCheckOptions& opts) {
    auto loss = [&] { return total_loss(forward(state, sample), sample.gt).total; };
    auto loss_and_grad = [&] {
        state.zero_grad();
        ForwardTrace trace;
        forward(state, sample, &trace);
        backward(state, trace, total_loss_grad(trace.pred, sample.gt));
    };
    return grad_check(loss, loss_and_grad, params, opts);
}

/// Interleaves the parameters of several groups so round-robin sampling visits each group in turn.
inline std::vector<Param*> interleave_groups(ModelState& state, std::initializer_list<Group> groups, std::size_t per_group) {
    std::vector<std::vector<Param*>> lists;
    for (Group g : groups) lists.push_back(state.params(g));
    std::vector<Param*> out;
    for (std::size_t i = 0; i < per_group; ++i)
        for (const auto& l : lists) out.push_back(l[i % l.size()]);
    return out;
}

/// Tiny stage-II state with every group trainable and the zero convolutions and prompt moved off zero.
inline ModelState tiny_stage2_state(std::uint64_t seed) {
    ModelState s = make_model(tiny_model_config());
    make_trainable_copy(s, CopyOptions{true, false});
    std::mt19937_64 rng(seed);
    for (Param* p : s.params(Group::theta_z))
        for (double& v : p->value) v = uniform(rng, -0.3, 0.3);
    for (Param* p : s.params(Group::omega))
        for (double& v : p->value) v = uniform(rng, -0.05, 0.05);
    return s;
}

}  // namespace cola::test
