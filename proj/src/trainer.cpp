#include "cola/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cola/objective.hpp"
#include "cola/random.hpp"

namespace cola {

TrainConfig TrainConfig::paper_stage1() {
    TrainConfig c;
    c.stage = 1;
    c.epochs = 100;
    c.lr_decay_every = 45;
    c.modality_dropout = false;
    return c;
}

TrainConfig TrainConfig::paper_stage2() {
    TrainConfig c;
    c.stage = 2;
    c.epochs = 60;
    c.lr_decay_every = 35;
    return c;
}

void TrainConfig::validate() const {
    if (stage != 1 && stage != 2) throw std::invalid_argument("train: stage must be 1 or 2");
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (batch_size <= 0) throw std::invalid_argument("train: batch_size must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be positive");
    if (lr_decay_every <= 0) throw std::invalid_argument("train: lr_decay_every must be positive");
    if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("train: lr_decay_factor must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
        throw std::invalid_argument("train: invalid Adam hyperparameters");
    }
    conditions.validate();
}

double learning_rate(const TrainConfig& cfg, int epoch) {
    return cfg.lr * std::pow(cfg.lr_decay_factor, -static_cast<double>(epoch / cfg.lr_decay_every));
}

Adam::Adam(std::vector<Param*> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const Param* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Param& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        }
    }
}

void write_step_record(std::ostream& os, const StepRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "epoch=%d step=%ld complete=%d missing_m1=%d missing_m2=%d bce=%.9g iou=%.9g total=%.9g lr=%.9g\n",
                  r.epoch, r.step, r.condition_counts[0], r.condition_counts[1], r.condition_counts[2], r.bce, r.iou,
                  r.total, r.lr);
    os << buf;
}

namespace {

void check_frozen(const ModelState& state, int epoch) {
    for (const auto& [group, digest] : state.frozen) {
        if (!assert_frozen(state, group)) {
            throw std::runtime_error("frozen group '" + std::string(to_string(group)) + "' changed by epoch " +
                                     std::to_string(epoch) + " (gradient leak)");
        }
    }
}

}  // namespace

void run_training(ModelState& state, const Dataset& data, const TrainConfig& cfg, bool sample_conditions,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (cfg.epochs == 0) return;
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");

    std::vector<Param*> trainable;
    for (Group g : kAllGroups)
        if (state.is_trainable(g))
            for (Param* p : state.params(g)) trainable.push_back(p);
    if (trainable.empty()) throw std::invalid_argument("train: no trainable parameters");
    Adam adam(trainable, cfg.adam);

    std::vector<std::size_t> order(data.size());
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate(cfg, epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 order_rng(mix_seed(cfg.seed, 0x0DE7ULL + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), order_rng);
        std::mt19937_64 cond_rng(mix_seed(cfg.seed ^ 0xC0D1ULL, static_cast<std::uint64_t>(epoch)));

        EpochSummary summary{epoch, 0.0, 0.0, 0.0, lr};
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(end - begin);
            StepRecord rec;
            rec.epoch = epoch;
            rec.step = step;
            rec.lr = lr;
            for (Param* p : trainable) p->zero_grad();
            for (std::size_t k = begin; k < end; ++k) {
                const DualModalSample& raw = data.samples[order[k]];
                const Condition c = sample_conditions ? sample_condition(cond_rng, cfg.conditions) : Condition::complete;
                ++rec.condition_counts[static_cast<int>(c)];
                const DualModalSample sample = apply_condition(raw, c);
                ForwardTrace trace;
                forward(state, sample, &trace);
                const LossReport loss = total_loss(trace.pred, sample.gt);
                if (!std::isfinite(loss.total)) {
                    throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                             std::to_string(step) + " sample " + raw.id + " (" +
                                             std::string(to_string(c)) + ")");
                }
                rec.bce += loss.bce * scale;
                rec.iou += loss.iou * scale;
                rec.total += loss.total * scale;
                backward(state, trace, total_loss_grad(trace.pred, sample.gt, scale));
            }
            adam.step(lr);
            if (hooks.log != nullptr) write_step_record(*hooks.log, rec);
            const double w = static_cast<double>(end - begin) / static_cast<double>(order.size());
            summary.bce += rec.bce * w;
            summary.iou += rec.iou * w;
            summary.total += rec.total * w;
            ++step;
        }
        if (hooks.log != nullptr) hooks.log->flush();
        if (hooks.epochs != nullptr) hooks.epochs->push_back(summary);
        check_frozen(state, epoch);
    }
}

ModelState train_stage1(const Dataset& data, const TrainConfig& cfg, const ModelConfig& model_cfg,
                        const TrainHooks& hooks) {
    if (cfg.stage != 1) throw std::invalid_argument("train_stage1: config stage must be 1");
    ModelState state = make_model(model_cfg);
    run_training(state, data, cfg, false, hooks);
    return state;
}

ModelState prepare_stage2(const ModelState& stage1, const TrainConfig& cfg) {
    if (stage1.stage != 1) throw std::invalid_argument("prepare_stage2: input state is not a stage-I model");
    ModelState state = stage1;
    state.frozen.clear();
    if (cfg.copy) {
        make_trainable_copy(state, CopyOptions{cfg.zero_conv, cfg.freeze});
    } else {
        for (Group g : kAllGroups)
            if (state.has_group(g)) state.stage1_digests[g] = group_digest(state, g);
        state.stage = 2;
        if (cfg.freeze) {
            freeze(state, Group::theta);
            freeze(state, Group::decoder);
            if (state.has_group(Group::omega)) freeze(state, Group::omega);
        }
    }
    return state;
}

ModelState train_stage2(const ModelState& stage1, const Dataset& data, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
    if (cfg.stage != 2) throw std::invalid_argument("train_stage2: config stage must be 2");
    ModelState state = prepare_stage2(stage1, cfg);
    run_training(state, data, cfg, cfg.modality_dropout, hooks);
    return state;
}

}  // namespace cola
