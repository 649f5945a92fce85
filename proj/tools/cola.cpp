#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "cola/ablation.hpp"
#include "cola/checkpoint.hpp"
#include "cola/config.hpp"
#include "cola/metrics.hpp"
#include "cola/trainer.hpp"

namespace fs = std::filesystem;
using namespace cola;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Builds an output directory next to its final location and renames it into
// place only after every file was written.
class StagedDir {
public:
    StagedDir(const fs::path& target, bool force) : target_(fs::absolute(target)) {
        if (fs::exists(target_) && !force) {
            throw std::runtime_error(target_.string() + " already exists (use --force to replace it)");
        }
        fs::create_directories(target_.parent_path());
        std::random_device rd;
        tmp_ = target_.parent_path() / ("." + target_.filename().string() + ".tmp" + std::to_string(rd()));
        fs::create_directory(tmp_);
    }
    ~StagedDir() {
        std::error_code ec;
        if (!committed_) fs::remove_all(tmp_, ec);
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;

    const fs::path& path() const { return tmp_; }

    void commit() {
        if (fs::exists(target_)) fs::remove_all(target_);
        fs::rename(tmp_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path tmp_;
    bool committed_ = false;
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
    if (!os.flush()) throw std::runtime_error("failed writing " + p.string());
}

DatasetLayout layout_for(const RunConfig& cfg) {
    DatasetLayout layout;
    layout.size = cfg.data.size;
    return layout;
}

// A directory with train/ and test/ subdirectories, or the config's synthetic data when empty.
Dataset dataset_split(const RunConfig& cfg, const std::string& data_dir, Split split) {
    if (data_dir.empty()) return synth_dataset(cfg.synth_options(split));
    fs::path root(data_dir);
    const fs::path sub = root / (split == Split::train ? "train" : "test");
    return load_dataset(fs::is_directory(sub) ? sub : root, layout_for(cfg), split);
}

int cmd_synth(const RunConfig& cfg, const std::string& out, bool force) {
    StagedDir dir(out, force);
    const DatasetLayout layout = layout_for(cfg);
    Json summary;
    for (Split split : {Split::train, Split::test}) {
        const Dataset d = synth_dataset(cfg.synth_options(split));
        const std::string name = split == Split::train ? "train" : "test";
        save_dataset(d, dir.path() / name, layout);
        summary[name] = {{"samples", d.size()}, {"digest", dataset_digest(d)}};
        std::cout << name << ": " << d.size() << " samples, digest " << dataset_digest(d) << '\n';
    }
    write_text(dir.path() / "config.json", to_json(cfg).dump(2) + "\n");
    write_text(dir.path() / "dataset.json", summary.dump(2) + "\n");
    dir.commit();
    return 0;
}

int cmd_train(const RunConfig& cfg, int stage, const std::string& from, const std::string& data_dir,
              const std::string& out, bool force) {
    if (stage != 1 && stage != 2) throw UsageError("--stage must be 1 or 2");
    if (stage == 2 && from.empty()) throw UsageError("stage 2 requires --from <stage-1 checkpoint>");
    ModelState stage1;
    if (stage == 2) {
        stage1 = load_checkpoint(from);
        if (stage1.stage != 1) throw std::runtime_error(from + " is not a stage-1 checkpoint");
    }
    const Dataset train = dataset_split(cfg, data_dir, Split::train);

    StagedDir dir(out, force);
    const std::string tag = "stage" + std::to_string(stage);
    std::ofstream log(dir.path() / ("train_" + tag + ".log"), std::ios::app);
    std::vector<EpochSummary> epochs;
    TrainHooks hooks{&log, &epochs};
    const auto t0 = std::chrono::steady_clock::now();
    const ModelState state =
        stage == 1 ? train_stage1(train, cfg.stage1, cfg.model, hooks) : train_stage2(stage1, train, cfg.stage2, hooks);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_checkpoint(state, dir.path() / ("checkpoint_" + tag + ".bin"));
    Json meta;
    meta["config"] = to_json(cfg);
    meta["config_digest"] = config_digest(cfg);
    meta["stage"] = stage;
    meta["train_samples"] = train.size();
    meta["dataset_digest"] = dataset_digest(train);
    meta["state_digest"] = state_digest(state);
    if (stage == 2) meta["from"] = fs::absolute(from).string();
    meta["epochs"] = Json::array();
    for (const auto& e : epochs) meta["epochs"].push_back({{"epoch", e.epoch}, {"total", e.total}, {"lr", e.lr}});
    write_text(dir.path() / "run.json", meta.dump(2) + "\n");
    dir.commit();
    std::cout << tag << " done in " << seconds << " s, " << epochs.size() << " epochs";
    if (!epochs.empty()) std::cout << ", final loss " << epochs.back().total;
    std::cout << "\ncheckpoint digest " << state_digest(state) << '\n';
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt, bool oracle, const std::string& data_dir,
             const std::string& out, bool export_maps, bool force) {
    if (ckpt.empty() == !oracle) throw UsageError("give exactly one of --ckpt or --oracle");
    const Dataset test = dataset_split(cfg, data_dir, Split::test);
    ModelState state;
    if (!oracle) state = load_checkpoint(ckpt);

    StagedDir dir(out, force);
    PredictionSink sink;
    if (export_maps) {
        for (Condition c : kAllConditions) fs::create_directories(dir.path() / "maps" / std::string(to_string(c)));
        sink = [&](std::size_t i, Condition c, const SaliencyMap& m) {
            write_saliency_png(m, dir.path() / "maps" / std::string(to_string(c)) / (test.samples[i].id + ".png"));
        };
    }
    EvaluationReport report = oracle ? evaluate(oracle_predictor(), test, cfg.metrics, sink)
                                     : evaluate(state, test, cfg.metrics, sink);
    report.config_digest = config_digest(cfg);
    report.checkpoint_digest = oracle ? "oracle" : state_digest(state);
    Json j = report_to_json(report);
    j["config"] = to_json(cfg);
    const std::string table = report_table(report, oracle ? "oracle" : fs::path(ckpt).filename().string());
    write_text(dir.path() / "report.json", j.dump(2) + "\n");
    write_text(dir.path() / "report.txt", table);
    dir.commit();
    std::cout << table;
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& matrix, const std::string& data_dir, const std::string& out,
               bool force) {
    try {
        ablation_matrix(matrix);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Dataset train = dataset_split(cfg, data_dir, Split::train);
    const Dataset test = dataset_split(cfg, data_dir, Split::test);
    StagedDir dir(out, force);
    const auto results = run_ablation(matrix, cfg, train, test, [](const AblationRow& r) {
        std::cerr << "ablation row " << r.label << '\n';
    });
    const std::string table = ablation_table(matrix, results);
    write_text(dir.path() / ("ablation_" + matrix + ".json"), ablation_to_json(matrix, results).dump(2) + "\n");
    write_text(dir.path() / ("ablation_" + matrix + ".txt"), table);
    dir.commit();
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-modal salient object detection: data, training, evaluation and ablations"};
    app.require_subcommand(1);
    std::string config_path;
    bool force = false;
    app.add_option("-c,--config", config_path, "JSON run config (default: desk profile)");
    app.add_flag("--force", force, "Replace existing outputs");

    std::string out;
    std::string data_dir;
    auto* synth = app.add_subcommand("synth", "Write the synthetic dataset");
    synth->add_option("-o,--out", out, "Output directory")->required();

    int stage = 1;
    std::string from;
    auto* train = app.add_subcommand("train", "Train stage 1 or stage 2");
    train->add_option("--stage", stage, "1 or 2")->required();
    train->add_option("--from", from, "Stage-1 checkpoint (stage 2)");
    train->add_option("--data", data_dir, "Dataset directory (default: synthetic from config)");
    train->add_option("-o,--out", out, "Run directory")->required();

    std::string ckpt;
    bool oracle = false;
    bool export_maps = false;
    auto* eval = app.add_subcommand("eval", "Evaluate under all three input conditions");
    eval->add_option("--ckpt", ckpt, "Checkpoint to evaluate");
    eval->add_flag("--oracle", oracle, "Predict the ground truth instead of loading a model");
    eval->add_option("--data", data_dir, "Dataset directory (default: synthetic from config)");
    eval->add_option("-o,--out", out, "Report directory")->required();
    eval->add_flag("--export-maps", export_maps, "Write every prediction as PNG");

    std::string matrix;
    auto* ablate = app.add_subcommand("ablate", "Run an ablation matrix");
    ablate->add_option("--matrix", matrix, "components, cd or complete")->required();
    ablate->add_option("--data", data_dir, "Dataset directory (default: synthetic from config)");
    ablate->add_option("-o,--out", out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = load_run_config(config_path);
        if (synth->parsed()) return cmd_synth(cfg, out, force);
        if (train->parsed()) return cmd_train(cfg, stage, from, data_dir, out, force);
        if (eval->parsed()) return cmd_eval(cfg, ckpt, oracle, data_dir, out, export_maps, force);
        if (ablate->parsed()) return cmd_ablate(cfg, matrix, data_dir, out, force);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
