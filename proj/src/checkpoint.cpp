#include "cola/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cola/config.hpp"
#include "cola/digest.hpp"

namespace cola {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'L', 'A', 'C', 'K', 'P', 'T'};

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    template <class T>
    void pod(const T& v) {
        os_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}
    template <class T>
    T pod() {
        T v{};
        read(&v, sizeof v);
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint32_t>();
        if (n > (1u << 26)) fail("implausible string length");
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    void read(void* dst, std::size_t n) {
        if (!is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n))) fail("truncated file");
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error("checkpoint " + path_ + ": " + what);
    }

private:
    std::istream& is_;
    std::string path_;
};

}  // namespace

std::string state_digest(const ModelState& state) {
    Sha256 h;
    for (Group g : kAllGroups) {
        if (!state.has_group(g)) continue;
        h.update(to_string(g));
        h.update(group_digest(state, g));
    }
    return h.hex();
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
    Json header;
    header["model"] = to_json(state.config);
    header["stage"] = state.stage;
    header["has_copy"] = state.backbone.has_copy;
    header["use_zero_conv"] = state.backbone.use_zero_conv;
    header["prompt_trainable"] = state.prompt.trainable;
    for (Group g : kAllGroups)
        if (state.has_group(g)) header["groups"][std::string(to_string(g))] = group_digest(state, g);
    header["frozen"] = Json::object();
    for (const auto& [g, d] : state.frozen) header["frozen"][std::string(to_string(g))] = d;
    header["stage1_digests"] = Json::object();
    for (const auto& [g, d] : state.stage1_digests) header["stage1_digests"][std::string(to_string(g))] = d;

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    Writer w(os);
    os.write(kMagic, sizeof kMagic);
    w.pod(kCheckpointVersion);
    const std::string text = header.dump();
    w.pod(static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    std::uint32_t n_groups = 0;
    for (Group g : kAllGroups) n_groups += state.has_group(g) ? 1 : 0;
    w.pod(n_groups);
    for (Group g : kAllGroups) {
        if (!state.has_group(g)) continue;
        const auto params = state.params(g);
        w.str(std::string(to_string(g)));
        w.pod(static_cast<std::uint32_t>(params.size()));
        for (const Param* p : params) {
            w.str(p->name);
            w.pod(static_cast<std::uint32_t>(p->shape.size()));
            for (int d : p->shape) w.pod(static_cast<std::int32_t>(d));
            w.pod(static_cast<std::uint64_t>(p->size()));
            os.write(reinterpret_cast<const char*>(p->value.data()),
                     static_cast<std::streamsize>(p->size() * sizeof(double)));
        }
    }
    if (!os.flush()) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    Reader r(is, path.string());
    char magic[sizeof kMagic];
    r.read(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint file");
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
    const auto header_len = r.pod<std::uint64_t>();
    if (header_len > (1ull << 26)) r.fail("implausible header length");
    std::string text(header_len, '\0');
    r.read(text.data(), text.size());

    Json header;
    ModelState state;
    try {
        header = Json::parse(text);
        state = make_model(model_config_from_json(header.at("model")));
        if (header.at("has_copy").get<bool>()) {
            state.backbone = make_trainable_copy(state.backbone, header.at("use_zero_conv").get<bool>());
        }
        state.stage = header.at("stage").get<int>();
        state.prompt.trainable = header.at("prompt_trainable").get<bool>();
        for (const auto& [name, d] : header.at("frozen").items()) state.frozen[parse_group(name)] = d.get<std::string>();
        for (const auto& [name, d] : header.at("stage1_digests").items())
            state.stage1_digests[parse_group(name)] = d.get<std::string>();
    } catch (const std::exception& e) {
        r.fail(std::string("bad header: ") + e.what());
    }

    const auto n_groups = r.pod<std::uint32_t>();
    std::uint32_t expected_groups = 0;
    for (Group g : kAllGroups) expected_groups += state.has_group(g) ? 1 : 0;
    if (n_groups != expected_groups) r.fail("group count mismatch");
    for (std::uint32_t k = 0; k < n_groups; ++k) {
        const std::string gname = r.str();
        Group g{};
        try {
            g = parse_group(gname);
        } catch (const std::exception& e) {
            r.fail(e.what());
        }
        if (!state.has_group(g)) r.fail("unexpected group " + gname);
        const auto params = state.params(g);
        if (r.pod<std::uint32_t>() != params.size()) r.fail("parameter count mismatch in group " + gname);
        for (Param* p : params) {
            if (r.str() != p->name) r.fail("parameter name mismatch at " + p->name);
            const auto ndims = r.pod<std::uint32_t>();
            if (ndims != p->shape.size()) r.fail("rank mismatch for " + p->name);
            for (int d : p->shape)
                if (r.pod<std::int32_t>() != d) r.fail("shape mismatch for " + p->name);
            if (r.pod<std::uint64_t>() != p->size()) r.fail("size mismatch for " + p->name);
            r.read(p->value.data(), p->size() * sizeof(double));
        }
        std::string recorded;
        try {
            recorded = header.at("groups").at(gname).get<std::string>();
        } catch (const std::exception&) {
            r.fail("missing digest for group " + gname);
        }
        if (group_digest(state, g) != recorded) r.fail("digest mismatch for group " + gname);
    }
    if (is.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
    return state;
}

}  // namespace cola
