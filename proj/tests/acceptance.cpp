// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "cola/ablation.hpp"
#include "cola/checkpoint.hpp"
#include "cola/config.hpp"
#include "cola/metrics.hpp"
#include "cola/trainer.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

using namespace cola;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, double seconds) {
    std::printf("%s criterion %d: %s [%.1f s]\n", pass ? "PASS" : "FAIL", id, what.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <class F>
void run(int id, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string what;
    bool pass = false;
    try {
        pass = body(what);
    } catch (const std::exception& e) {
        what += std::string(" exception: ") + e.what();
        pass = false;
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, pass, what, s);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void progress(const char* what) {
    std::fprintf(stderr, "[acceptance] %s\n", what);
}

// The shared seed-7 desk benchmark: stage-I model, CD stage-II model and their evaluations.
struct Benchmark {
    RunConfig cfg;
    Dataset train;
    Dataset test;
    std::optional<ModelState> stage1;
    std::optional<ModelState> stage2;
    EvaluationReport eval1;
    EvaluationReport eval2;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;
};

Benchmark build_benchmark() {
    Benchmark b;
    b.cfg = desk_profile();
    b.train = synth_dataset(b.cfg.synth_options(Split::train));
    b.test = synth_dataset(b.cfg.synth_options(Split::test));
    auto t0 = std::chrono::steady_clock::now();
    progress("stage I");
    b.stage1 = train_stage1(b.train, b.cfg.stage1, b.cfg.model);
    b.stage1_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    t0 = std::chrono::steady_clock::now();
    progress("stage II (CD)");
    b.stage2 = train_stage2(*b.stage1, b.train, b.cfg.stage2);
    b.stage2_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    b.eval1 = evaluate(*b.stage1, b.test, b.cfg.metrics);
    b.eval2 = evaluate(*b.stage2, b.test, b.cfg.metrics);
    b.eval1.config_digest = b.eval2.config_digest = config_digest(b.cfg);
    b.eval1.checkpoint_digest = state_digest(*b.stage1);
    b.eval2.checkpoint_digest = state_digest(*b.stage2);
    return b;
}

double average_f(const EvaluationReport& r) { return r.average.f_beta; }
double complete_f(const EvaluationReport& r) { return r.conditions[0].f_beta; }

}  // namespace

int main() {
    // 1. Zero-initialized copy leaves predictions unchanged.
    run(1, [](std::string& what) {
        const RunConfig cfg = desk_profile();
        const ModelState s1 = make_model(cfg.model);
        ModelState s2 = s1;
        make_trainable_copy(s2);
        SynthOptions o = cfg.synth_options(Split::test);
        o.n_samples = 100;
        o.seed = 1234;
        const Dataset d = synth_dataset(o);
        double worst = 0.0;
        for (const auto& sample : d.samples)
            for (Condition c : kAllConditions)
                worst = std::max(worst, max_abs_diff(predict(s1, sample, c).values, predict(s2, sample, c).values));
        what = fmt("zero-init equivalence, max |pred_II - pred_I| = %.3g over 100 inputs x 3 conditions (< 1e-6)", worst);
        return worst < 1e-6;
    });

    // 3. Fusion-weight contract.
    run(3, [](std::string& what) {
        std::mt19937_64 rng(2024);
        double worst_sum = 0.0;
        bool in_range = true;
        bool swap_exact = true;
        for (int i = 0; i < 10000; ++i) {
            double a1 = uniform(rng, -1.0, 1.0);
            double a2 = uniform(rng, -1.0, 1.0);
            if (i % 5 == 0) a1 = uniform(rng, -1e-6, 1e-6);
            if (i % 7 == 0) a2 = uniform(rng, -1e-9, 1e-9);
            if (i % 13 == 0) a1 = 0.0;
            const FusionWeights w = fusion_weights({a1, a2});
            const FusionWeights s = fusion_weights({a2, a1});
            worst_sum = std::max(worst_sum, std::abs(w.beta_m1 + w.beta_m2 - 1.0));
            in_range = in_range && w.beta_m1 >= 0.0 && w.beta_m1 <= 1.0 && w.beta_m2 >= 0.0 && w.beta_m2 <= 1.0;
            swap_exact = swap_exact && s.beta_m1 == w.beta_m2 && s.beta_m2 == w.beta_m1;
        }
        what = fmt("fusion weights over 10000 alpha pairs: max |b1+b2-1| = %.3g, in [0,1]: %s, swap exact: %s",
                   worst_sum, in_range ? "yes" : "no", swap_exact ? "yes" : "no");
        return worst_sum <= 1e-9 && in_range && swap_exact;
    });

    // 4. Printed aggregate rows.
    run(4, [](std::string& what) {
        double worst = 0.0;
        for (const auto& row : oracle::kPrintedRows) {
            worst = std::max(worst, std::abs(average(row.full, row.miss_m1, row.miss_m2) - row.printed_average));
            worst = std::max(worst, std::abs(average_drop(row.full, row.miss_m1, row.miss_m2) - row.printed_drop));
        }
        // Rounded printed values put a halfway case exactly on the tolerance.
        what = fmt("Average / Average Drop reproduce the printed rows, max deviation %.6f (<= 0.0005)", worst);
        return worst <= 0.0005 + 1e-12;
    });

    // 5. Metric oracles.
    run(5, [](std::string& what) {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            SaliencyMap p = test::random_map(8, 8, seed);
            std::mt19937_64 rng(mix_seed(seed, 99));
            for (std::size_t i = 0; i < p.size(); i += 5) p[i] = uniform_int(rng, 0, 256) / 256.0;
            const SaliencyMap g = seed % 17 == 0   ? SaliencyMap(8, 8, 0.0)
                                  : seed % 19 == 0 ? SaliencyMap(8, 8, 1.0)
                                                   : test::random_mask(8, 8, mix_seed(seed, 7), 0.1 + 0.05 * (seed % 10));
            worst = std::max({worst, std::abs(mae(p, g) - oracle::mae(p, g)),
                              std::abs(f_measure_mean(p, g) - oracle::f_measure_mean(p, g)),
                              std::abs(s_measure(p, g) - oracle::s_measure(p, g)),
                              std::abs(e_measure_mean(p, g) - oracle::e_measure_mean(p, g))});
        }
        double perfect = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const SaliencyMap g = test::random_mask(8, 8, seed, 0.3);
            const MetricSet m = compute_metrics(g, g);
            perfect = std::max({perfect, 1.0 - m.f_beta, 1.0 - m.s_alpha, 1.0 - m.e_m, m.mae});
        }
        what = fmt("metrics vs naive oracles on 50 fixtures, max diff %.3g (<= 1e-9); perfect-prediction gap %.3g (<= 1e-6)",
                   worst, perfect);
        return worst <= 1e-9 && perfect <= 1e-6;
    });

    // 6. Gradient check on the tiny pipeline.
    run(6, [](std::string& what) {
        ModelState s = test::tiny_stage2_state(5);
        double worst = 0.0;
        std::size_t checked = 0;
        for (std::uint64_t k = 0; k < 3; ++k) {
            const DualModalSample sample = test::random_sample(8, 40 + k);
            const auto params =
                test::interleave_groups(s, {Group::theta_f, Group::theta_z, Group::omega, Group::decoder}, 6);
            const GradCheckResult r = test::pipeline_grad_check(s, sample, params, {1e-3, 24, k});
            worst = std::max(worst, r.max_relative_error);
            checked += r.checked;
        }
        what = fmt("grad_check on the 2-level 8x8 pipeline, %zu entries over theta_f/theta_z/omega/decoder, "
                   "max relative error %.3g (< 1e-4)",
                   checked, worst);
        return worst < 1e-4 && checked >= 20;
    });

    Benchmark bench = build_benchmark();
    std::fprintf(stderr, "[acceptance] stage I %.0f s, stage II %.0f s\n%s%s", bench.stage1_seconds,
                 bench.stage2_seconds, report_table(bench.eval1, "stage I").c_str(),
                 report_table(bench.eval2, "stage II (CD)").c_str());

    // 2. Freeze integrity after the full desk stage-II run.
    run(2, [&](std::string& what) {
        bool ok = true;
        for (Group g : {Group::theta, Group::omega, Group::decoder}) {
            ok = ok && assert_frozen(*bench.stage2, g) &&
                 group_digest(*bench.stage2, g) == group_digest(*bench.stage1, g) &&
                 bench.stage2->stage1_digests.at(g) == group_digest(*bench.stage1, g);
        }
        what = fmt("theta, omega and decoder digests unchanged after %d-epoch stage II on %zu samples (%.0f s)",
                   bench.cfg.stage2.epochs, bench.train.size(), bench.stage2_seconds);
        return ok;
    });

    // 7. CD robustness.
    run(7, [&](std::string& what) {
        const double a1 = average_f(bench.eval1), a2 = average_f(bench.eval2);
        const double c1 = complete_f(bench.eval1), c2 = complete_f(bench.eval2);
        what = fmt("Average F_beta stage II %.4f > stage I %.4f; complete F_beta %.4f vs %.4f (|diff| %.4f <= 0.02)", a2,
                   a1, c2, c1, std::abs(c2 - c1));
        return a2 > a1 && std::abs(c2 - c1) <= 0.02;
    });

    // 8. Plain modality dropout versus CD.
    run(8, [&](std::string& what) {
        AblationRow md_row;
        for (const auto& row : ablation_matrix("complete"))
            if (row.additional_training && !row.copy && !row.zero_conv && !row.freeze && row.modality_dropout) md_row = row;
        const RunConfig cfg = row_config(bench.cfg, md_row);
        progress("stage II (plain modality dropout)");
        const ModelState md = train_stage2(*bench.stage1, bench.train, cfg.stage2);
        const EvaluationReport r = evaluate(md, bench.test, cfg.metrics);
        const double gap = complete_f(bench.eval2) - complete_f(r);
        what = fmt("complete F_beta: MD %.4f, CD %.4f, gap %.4f (>= 0.01); MD Average F_beta %.4f", complete_f(r),
                   complete_f(bench.eval2), gap, average_f(r));
        return gap >= 0.01;
    });

    // 9. LQA discrimination on held-out corrupted pairs.
    run(9, [&](std::string& what) {
        double clean = 0.0, corrupted = 0.0;
        int wins = 0;
        const std::size_t n = std::min<std::size_t>(50, bench.test.size());
        for (std::size_t i = 0; i < n; ++i) {
            DualModalSample x = bench.test.samples[i];
            // Alternate which modality is corrupted so a fixed modality preference cannot decide the outcome.
            const bool corrupt_m2 = i % 2 == 0;
            ModalityImage& target = corrupt_m2 ? x.m2 : x.m1;
            target = inject_noise(target, NoiseKind::salt_pepper, 0.5, mix_seed(77, i));
            const FusionWeights w = model_fusion_weights(*bench.stage1, x.m1, x.m2);
            const double b_clean = corrupt_m2 ? w.beta_m1 : w.beta_m2;
            clean += b_clean;
            corrupted += 1.0 - b_clean;
            wins += b_clean > 0.5;
        }
        clean /= static_cast<double>(n);
        corrupted /= static_cast<double>(n);
        what = fmt("mean beta clean %.4f > corrupted %.4f over %zu salt_pepper(0.5) pairs (clean wins %d)", clean,
                   corrupted, n, wins);
        return clean > corrupted;
    });

    // 10. Determinism of the criterion-7 run.
    run(10, [&](std::string& what) {
        progress("determinism rerun");
        const Benchmark again = build_benchmark();
        const bool same_state = state_digest(*again.stage1) == state_digest(*bench.stage1) &&
                                state_digest(*again.stage2) == state_digest(*bench.stage2);
        const bool same_report = report_to_json(again.eval1).dump() == report_to_json(bench.eval1).dump() &&
                                 report_to_json(again.eval2).dump() == report_to_json(bench.eval2).dump();
        what = fmt("rerun: checkpoint digests %s, evaluation reports %s", same_state ? "identical" : "DIFFER",
                   same_report ? "byte-identical" : "DIFFER");
        return same_state && same_report;
    });

    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
