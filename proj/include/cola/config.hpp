#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cola/data.hpp"
#include "cola/metrics.hpp"
#include "cola/model.hpp"
#include "cola/trainer.hpp"

namespace cola {

using Json = nlohmann::ordered_json;

struct DataConfig {
    int size = 64;
    int train_samples = 200;
    int test_samples = 50;
    double noise_fraction = 0.3;
    double test_noise_fraction = 0.3;
};

/// Every knob of a run. Serialized as nested JSON; the "profile" key selects
/// the base ("desk" or "paper") that the remaining keys override.
struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 7;
    DataConfig data;
    ModelConfig model;
    TrainConfig stage1;
    TrainConfig stage2;
    MetricOptions metrics;

    /// Pushes the top-level seed into every seeded sub-config.
    void propagate_seed();
    SynthOptions synth_options(Split split) const;
};

RunConfig desk_profile();
RunConfig paper_profile();
RunConfig profile_by_name(const std::string& name);

Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const RunConfig& c);

/// Throws std::invalid_argument naming the first unknown or mistyped key.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {}, const std::string& path = "train");
RunConfig run_config_from_json(const Json& j);

/// Reads a config file; an empty path yields the desk profile. COLA_SEED, when
/// set, overrides the seed.
RunConfig load_run_config(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON dump.
std::string config_digest(const RunConfig& c);

}  // namespace cola
