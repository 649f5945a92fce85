#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "cola/checkpoint.hpp"
#include "support.hpp"

using namespace cola;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
    const fs::path dir = fs::temp_directory_path() / "cola_test_ckpt";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ModelState s = test::tiny_stage2_state(3);
    freeze(s, Group::decoder);
    save_checkpoint(s, dir / "a.bin");
    const ModelState back = load_checkpoint(dir / "a.bin");
    CHECK(state_digest(back) == state_digest(s));
    CHECK(back.stage == 2);
    CHECK(back.is_frozen(Group::decoder));
    CHECK(back.is_trainable(Group::theta));
    CHECK(back.stage1_digests == s.stage1_digests);
    save_checkpoint(back, dir / "b.bin");
    CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));

    const DualModalSample sample = test::random_sample(8, 1);
    for (Condition c : kAllConditions) CHECK(predict(back, sample, c) == predict(s, sample, c));

    ModelState s1 = make_model(test::tiny_model_config());
    save_checkpoint(s1, dir / "s1.bin");
    const ModelState s1_back = load_checkpoint(dir / "s1.bin");
    CHECK(s1_back.stage == 1);
    CHECK_FALSE(s1_back.has_group(Group::theta_f));

    fs::remove_all(dir);
}

TEST_CASE("corrupted checkpoints are rejected") {
    const fs::path dir = fs::temp_directory_path() / "cola_test_ckpt_bad";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const ModelState s = make_model(test::tiny_model_config());
    save_checkpoint(s, dir / "ok.bin");
    const std::string bytes = slurp(dir / "ok.bin");

    auto expect_error = [&](const std::string& data, const std::string& fragment) {
        spit(dir / "bad.bin", data);
        try {
            load_checkpoint(dir / "bad.bin");
            FAIL("expected a load failure");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };

    std::string flipped = bytes;
    flipped[flipped.size() - 3] ^= 0x10;
    expect_error(flipped, "digest");
    expect_error(bytes.substr(0, bytes.size() - 5), "truncated");
    expect_error("NOTACKPT" + bytes.substr(8), "not a checkpoint");
    expect_error(bytes + "x", "trailing");
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), std::runtime_error);
    fs::remove_all(dir);
}
