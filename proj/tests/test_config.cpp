#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cola/config.hpp"

using namespace cola;
namespace fs = std::filesystem;

TEST_CASE("profiles") {
    const RunConfig desk = desk_profile();
    CHECK(desk.seed == 7);
    CHECK(desk.data.train_samples == 200);
    CHECK(desk.data.test_samples == 50);
    CHECK(desk.data.size == 64);
    CHECK(desk.stage2.epochs == 20);
    const RunConfig paper = paper_profile();
    CHECK(paper.stage1.epochs == 100);
    CHECK(paper.stage2.epochs == 60);
    CHECK(paper.stage1.lr == 1e-4);
    CHECK(paper.stage1.batch_size == 8);
    CHECK(paper.model.encoder.widths == std::vector<int>{16, 32, 64, 128, 256});
    CHECK_THROWS_AS(profile_by_name("laptop"), std::invalid_argument);
}

TEST_CASE("json round trip and overrides") {
    const RunConfig desk = desk_profile();
    const RunConfig back = run_config_from_json(to_json(desk));
    CHECK(to_json(back) == to_json(desk));
    CHECK(config_digest(back) == config_digest(desk));

    const RunConfig c = run_config_from_json(Json::parse(R"({
        "seed": 11,
        "data": {"train_samples": 20},
        "lqa": {"prompt_text": "A sharp photo."},
        "stage2": {"freeze": false, "epochs": 3}
    })"));
    CHECK(c.seed == 11);
    CHECK(c.model.init_seed == 11);
    CHECK(c.stage1.seed == 11);
    CHECK(c.data.train_samples == 20);
    CHECK(c.model.prompt_text == "A sharp photo.");
    CHECK_FALSE(c.stage2.freeze);
    CHECK(c.stage2.epochs == 3);
    CHECK(config_digest(c) != config_digest(desk));
}

TEST_CASE("invalid configs name the offending key") {
    auto message = [](const char* text) {
        try {
            run_config_from_json(Json::parse(text));
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message(R"({"stage1": {"epochz": 3}})").find("stage1.epochz") != std::string::npos);
    CHECK(message(R"({"lqa": {"embedder": {"dims": 3}}})").find("lqa.embedder.dims") != std::string::npos);
    CHECK(message(R"({"data": {"size": "big"}})").find("data.size") != std::string::npos);
    CHECK(message(R"({"data": {"size": 72}})").find("divisible") != std::string::npos);
    CHECK(message(R"({"stage2": {"batch_size": 0}})").find("batch_size") != std::string::npos);
    CHECK(message(R"({"profile": "huge"})").find("huge") != std::string::npos);
}

TEST_CASE("load_run_config and COLA_SEED") {
    const fs::path p = fs::temp_directory_path() / "cola_test_config.json";
    {
        std::ofstream out(p);
        out << R"({"seed": 3})";
    }
    unsetenv("COLA_SEED");
    CHECK(load_run_config(p).seed == 3);
    CHECK(load_run_config({}).seed == 7);
    setenv("COLA_SEED", "99", 1);
    const RunConfig c = load_run_config(p);
    CHECK(c.seed == 99);
    CHECK(c.stage2.seed == 99);
    setenv("COLA_SEED", "9x", 1);
    CHECK_THROWS_AS(load_run_config(p), std::invalid_argument);
    unsetenv("COLA_SEED");
    CHECK_THROWS_AS(load_run_config(p.string() + ".missing"), std::runtime_error);
    fs::remove(p);
}
