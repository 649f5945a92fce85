#include "cola/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cola/digest.hpp"

namespace cola {

namespace {

// Reads known keys from one JSON object and rejects the rest.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw std::invalid_argument("config: '" + path_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.insert(key);
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument("config: '" + where(key) + "' has the wrong type");
        }
    }

    const Json* child(const char* key) {
        const auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw std::invalid_argument("config: unknown key '" + where(key) + "'");
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string_view norm_name(NormKind k) { return k == NormKind::layer ? "layer" : "none"; }

NormKind parse_norm(const std::string& s) {
    if (s == "layer") return NormKind::layer;
    if (s == "none") return NormKind::none;
    throw std::invalid_argument("config: unknown norm '" + s + "'");
}

void read_lqa(const Json& j, ModelConfig& c) {
    ObjectReader r(j, "lqa");
    r.get("enabled", c.use_lqa);
    r.get("prompt_text", c.prompt_text);
    if (const Json* e = r.child("embedder")) {
        ObjectReader er(*e, "lqa.embedder");
        er.get("seed", c.embedder.seed);
        er.get("dim", c.embedder.dim);
        er.get("grid", c.embedder.grid);
        er.get("sharpness_weight", c.embedder.sharpness_weight);
        er.get("anchor_weight", c.embedder.anchor_weight);
        er.finish();
    }
    r.finish();
    if (c.embedder.dim <= 0 || c.embedder.grid <= 0) throw std::invalid_argument("config: lqa.embedder dim and grid must be positive");
}

}  // namespace

void RunConfig::propagate_seed() {
    model.init_seed = seed;
    stage1.seed = seed;
    stage2.seed = seed;
}

SynthOptions RunConfig::synth_options(Split split) const {
    SynthOptions o;
    o.seed = seed;
    o.size = data.size;
    o.split = split;
    o.n_samples = split == Split::train ? data.train_samples : data.test_samples;
    o.noise_fraction = split == Split::train ? data.noise_fraction : data.test_noise_fraction;
    return o;
}

RunConfig desk_profile() {
    RunConfig c;
    c.profile = "desk";
    c.model.encoder.widths = {8, 16, 32, 64, 128};
    c.stage1 = TrainConfig::paper_stage1();
    c.stage1.epochs = 100;
    c.stage1.lr = 1e-3;
    c.stage1.lr_decay_every = 45;
    c.stage2 = TrainConfig::paper_stage2();
    c.stage2.epochs = 20;
    c.stage2.lr = 1e-3;
    c.stage2.lr_decay_every = 15;
    c.propagate_seed();
    return c;
}

RunConfig paper_profile() {
    RunConfig c;
    c.profile = "paper";
    c.stage1 = TrainConfig::paper_stage1();
    c.stage2 = TrainConfig::paper_stage2();
    c.propagate_seed();
    return c;
}

RunConfig profile_by_name(const std::string& name) {
    if (name == "desk") return desk_profile();
    if (name == "paper") return paper_profile();
    throw std::invalid_argument("config: unknown profile '" + name + "'");
}

Json to_json(const ModelConfig& c) {
    Json j;
    j["widths"] = c.encoder.widths;
    j["norm"] = norm_name(c.encoder.norm);
    j["in_channels"] = c.encoder.in_channels;
    j["cbam_reduction"] = c.cbam_reduction;
    j["cbam_min_hidden"] = c.cbam_min_hidden;
    j["init_seed"] = c.init_seed;
    j["image_size"] = c.image_size;
    j["lqa"] = {{"enabled", c.use_lqa},
                {"prompt_text", c.prompt_text},
                {"embedder",
                 {{"seed", c.embedder.seed},
                  {"dim", c.embedder.dim},
                  {"grid", c.embedder.grid},
                  {"sharpness_weight", c.embedder.sharpness_weight},
                  {"anchor_weight", c.embedder.anchor_weight}}}};
    return j;
}

Json to_json(const TrainConfig& c) {
    Json j;
    j["stage"] = c.stage;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["lr_decay_every"] = c.lr_decay_every;
    j["lr_decay_factor"] = c.lr_decay_factor;
    j["seed"] = c.seed;
    j["conditions"] = {{"complete", c.conditions.p_complete},
                       {"missing_m1", c.conditions.p_missing_m1},
                       {"missing_m2", c.conditions.p_missing_m2}};
    j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
    j["copy"] = c.copy;
    j["zero_conv"] = c.zero_conv;
    j["freeze"] = c.freeze;
    j["modality_dropout"] = c.modality_dropout;
    return j;
}

Json to_json(const RunConfig& c) {
    Json j;
    j["profile"] = c.profile;
    j["seed"] = c.seed;
    j["data"] = {{"size", c.data.size},
                 {"train_samples", c.data.train_samples},
                 {"test_samples", c.data.test_samples},
                 {"noise_fraction", c.data.noise_fraction},
                 {"test_noise_fraction", c.data.test_noise_fraction}};
    j["model"] = to_json(c.model);
    j["model"].erase("init_seed");
    j["model"].erase("image_size");
    j["lqa"] = j["model"]["lqa"];
    j["model"].erase("lqa");
    j["stage1"] = to_json(c.stage1);
    j["stage1"].erase("seed");
    j["stage2"] = to_json(c.stage2);
    j["stage2"].erase("seed");
    j["metrics"] = {{"f_beta2", c.metrics.f_beta2}, {"s_lambda", c.metrics.s_lambda}};
    return j;
}

ModelConfig model_config_from_json(const Json& j, ModelConfig base) {
    ObjectReader r(j, "model");
    r.get("widths", base.encoder.widths);
    std::string norm{norm_name(base.encoder.norm)};
    r.get("norm", norm);
    base.encoder.norm = parse_norm(norm);
    r.get("in_channels", base.encoder.in_channels);
    r.get("cbam_reduction", base.cbam_reduction);
    r.get("cbam_min_hidden", base.cbam_min_hidden);
    if (const Json* l = r.child("lqa")) read_lqa(*l, base);
    r.get("init_seed", base.init_seed);
    r.get("image_size", base.image_size);
    r.finish();
    if (base.encoder.widths.empty()) throw std::invalid_argument("config: model.widths must not be empty");
    for (int w : base.encoder.widths)
        if (w <= 0) throw std::invalid_argument("config: model.widths must be positive");
    if (base.image_size <= 0 || base.image_size % (1 << base.encoder.levels()) != 0) {
        throw std::invalid_argument("config: model.image_size must be a positive multiple of 2^levels");
    }
    return base;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig base, const std::string& path) {
    ObjectReader r(j, path);
    r.get("stage", base.stage);
    r.get("epochs", base.epochs);
    r.get("batch_size", base.batch_size);
    r.get("lr", base.lr);
    r.get("lr_decay_every", base.lr_decay_every);
    r.get("lr_decay_factor", base.lr_decay_factor);
    r.get("seed", base.seed);
    if (const Json* c = r.child("conditions")) {
        ObjectReader cr(*c, path + ".conditions");
        cr.get("complete", base.conditions.p_complete);
        cr.get("missing_m1", base.conditions.p_missing_m1);
        cr.get("missing_m2", base.conditions.p_missing_m2);
        cr.finish();
    }
    if (const Json* a = r.child("adam")) {
        ObjectReader ar(*a, path + ".adam");
        ar.get("beta1", base.adam.beta1);
        ar.get("beta2", base.adam.beta2);
        ar.get("eps", base.adam.eps);
        ar.finish();
    }
    r.get("copy", base.copy);
    r.get("zero_conv", base.zero_conv);
    r.get("freeze", base.freeze);
    r.get("modality_dropout", base.modality_dropout);
    r.finish();
    base.validate();
    return base;
}

RunConfig run_config_from_json(const Json& j) {
    ObjectReader r(j, "");
    std::string profile = "desk";
    r.get("profile", profile);
    RunConfig c = profile_by_name(profile);
    r.get("seed", c.seed);
    if (const Json* d = r.child("data")) {
        ObjectReader dr(*d, "data");
        dr.get("size", c.data.size);
        dr.get("train_samples", c.data.train_samples);
        dr.get("test_samples", c.data.test_samples);
        dr.get("noise_fraction", c.data.noise_fraction);
        dr.get("test_noise_fraction", c.data.test_noise_fraction);
        dr.finish();
    }
    if (const Json* m = r.child("model")) c.model = model_config_from_json(*m, c.model);
    if (const Json* l = r.child("lqa")) read_lqa(*l, c.model);
    if (const Json* s = r.child("stage1")) c.stage1 = train_config_from_json(*s, c.stage1, "stage1");
    if (const Json* s = r.child("stage2")) c.stage2 = train_config_from_json(*s, c.stage2, "stage2");
    if (const Json* m = r.child("metrics")) {
        ObjectReader mr(*m, "metrics");
        mr.get("f_beta2", c.metrics.f_beta2);
        mr.get("s_lambda", c.metrics.s_lambda);
        mr.finish();
    }
    r.finish();
    if (c.stage1.stage != 1 || c.stage2.stage != 2) throw std::invalid_argument("config: stage1/stage2 stage mismatch");
    if (c.data.size % (1 << c.model.encoder.levels()) != 0) {
        throw std::invalid_argument("config: data.size must be divisible by 2^levels");
    }
    c.model.image_size = c.data.size;
    c.propagate_seed();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    RunConfig c;
    if (path.empty()) {
        c = desk_profile();
    } else {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file " + path.string());
        Json j;
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument("config: " + path.string() + ": " + e.what());
        }
        c = run_config_from_json(j);
    }
    if (const char* env = std::getenv("COLA_SEED"); env != nullptr && *env != '\0') {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(env, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != std::char_traits<char>::length(env)) throw std::invalid_argument("COLA_SEED must be an unsigned integer");
        c.seed = v;
        c.propagate_seed();
    }
    return c;
}

std::string config_digest(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

}  // namespace cola
