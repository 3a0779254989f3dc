#include "udiff/checkpoint.hpp"

#include "udiff/data.hpp"

#include "json.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace udiff {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'U', 'D', 'I', 'F'};
constexpr std::uint8_t kFloat32 = 0;

class Writer {
public:
    template <typename T>
    void put(T value) {
        const auto* p = reinterpret_cast<const char*>(&value);
        bytes.append(p, sizeof(T));
    }
    void put_bytes(std::string_view s) { bytes.append(s); }
    std::string bytes;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }
    std::string_view take(std::size_t n) {
        if (n > data_.size() - pos_) throw CheckpointError("checkpoint integrity error: unexpected end of data");
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t position() const { return pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

struct Group {
    const char* prefix;
    const ParamSet<float>* set;
};

}  // namespace

bool Checkpoint::operator==(const Checkpoint& o) const {
    return version == o.version && model == o.model && train == o.train && params == o.params &&
           optim.first_moment == o.optim.first_moment && optim.second_moment == o.optim.second_moment &&
           optim.step == o.optim.step && ema.shadow == o.ema.shadow && ema.decay == o.ema.decay && step == o.step &&
           rng_state == o.rng_state && consecutive_nonfinite == o.consecutive_nonfinite &&
           metadata_json == o.metadata_json;
}

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config, std::string metadata_json) {
    Checkpoint c;
    c.model = state.params.config;
    c.train = config;
    c.params = state.params;
    c.optim = state.optim;
    c.ema = state.ema;
    c.step = state.step;
    std::ostringstream rng;
    rng << state.rng;
    c.rng_state = rng.str();
    c.consecutive_nonfinite = state.consecutive_nonfinite;
    c.metadata_json = std::move(metadata_json);
    return c;
}

TrainState restore_train_state(const Checkpoint& c) {
    TrainState s;
    s.params = c.params;
    s.optim = c.optim;
    s.ema = c.ema;
    s.step = c.step;
    std::istringstream rng(c.rng_state);
    rng >> s.rng;
    if (!rng) throw CheckpointError("checkpoint has an unreadable rng state");
    s.consecutive_nonfinite = c.consecutive_nonfinite;
    return s;
}

std::string serialize_checkpoint(const Checkpoint& c) {
    nlohmann::json header{{"model", c.model},
                          {"train", c.train},
                          {"step", c.step},
                          {"optim_step", c.optim.step},
                          {"ema_decay", c.ema.decay},
                          {"rng_state", c.rng_state},
                          {"consecutive_nonfinite", c.consecutive_nonfinite},
                          {"metadata", nlohmann::json::parse(c.metadata_json)}};
    const std::string header_text = header.dump();

    const Group groups[] = {{"params/", &c.params.tensors},
                            {"optim.m/", &c.optim.first_moment},
                            {"optim.v/", &c.optim.second_moment},
                            {"ema/", &c.ema.shadow.tensors}};

    Writer w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint32_t>(c.version);
    w.put<std::uint64_t>(header_text.size());
    w.put_bytes(header_text);

    std::uint32_t count = 0;
    for (const auto& g : groups) count += static_cast<std::uint32_t>(g.set->size());
    w.put<std::uint32_t>(count);
    std::uint64_t offset = 0;
    for (const auto& g : groups) {
        for (const auto& t : *g.set) {
            const std::string name = g.prefix + t.name;
            w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
            w.put_bytes(name);
            w.put<std::uint8_t>(kFloat32);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
            for (auto d : t.shape) w.put<std::int64_t>(d);
            const std::uint64_t nbytes = t.data.size() * sizeof(float);
            w.put<std::uint64_t>(offset);
            w.put<std::uint64_t>(nbytes);
            offset += nbytes;
        }
    }
    for (const auto& g : groups)
        for (const auto& t : *g.set)
            w.put_bytes(std::string_view(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float)));
    w.put<std::uint32_t>(crc32_of(w.bytes));
    return std::move(w.bytes);
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4))
        throw CheckpointError("not a checkpoint file (bad magic bytes)");
    Reader r(bytes);
    r.take(4);
    Checkpoint c;
    c.version = r.get<std::uint32_t>();
    if (c.version != Checkpoint::kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version) + " (expected " +
                              std::to_string(Checkpoint::kVersion) + ")");
    if (bytes.size() < 4 + 4 + 8 + 4) throw CheckpointError("checkpoint integrity error: file truncated");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    const auto body = bytes.substr(0, bytes.size() - 4);
    if (crc32_of(body) != stored_crc) throw CheckpointError("checkpoint integrity error: CRC32 mismatch");

    const auto header_size = r.get<std::uint64_t>();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.take(header_size));
        c.model = header.at("model").get<ModelConfig>();
        c.train = header.at("train").get<TrainConfig>();
        c.step = header.at("step").get<std::int64_t>();
        c.optim.step = header.at("optim_step").get<std::int64_t>();
        c.ema.decay = header.at("ema_decay").get<double>();
        c.rng_state = header.at("rng_state").get<std::string>();
        c.consecutive_nonfinite = header.at("consecutive_nonfinite").get<int>();
        c.metadata_json = header.at("metadata").dump();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint header is malformed: ") + e.what());
    }

    struct Entry {
        std::string name;
        std::vector<std::int64_t> shape;
        std::uint64_t offset, nbytes;
    };
    const auto count = r.get<std::uint32_t>();
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        e.name = std::string(r.take(r.get<std::uint32_t>()));
        if (r.get<std::uint8_t>() != kFloat32) throw CheckpointError("unsupported tensor dtype in " + e.name);
        const auto rank = r.get<std::uint32_t>();
        for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(r.get<std::int64_t>());
        e.offset = r.get<std::uint64_t>();
        e.nbytes = r.get<std::uint64_t>();
        entries.push_back(std::move(e));
    }
    const std::size_t data_start = r.position();
    if (data_start > body.size()) throw CheckpointError("checkpoint integrity error: tensor table overruns file");
    const auto data = body.substr(data_start);

    c.params.config = c.model;
    c.ema.shadow.config = c.model;
    for (const auto& e : entries) {
        ParamSet<float>* target = nullptr;
        std::string name;
        for (auto [prefix, set] : {std::pair<std::string_view, ParamSet<float>*>{"params/", &c.params.tensors},
                                   {"optim.m/", &c.optim.first_moment},
                                   {"optim.v/", &c.optim.second_moment},
                                   {"ema/", &c.ema.shadow.tensors}}) {
            if (e.name.starts_with(prefix)) {
                target = set;
                name = e.name.substr(prefix.size());
                break;
            }
        }
        if (target == nullptr) throw CheckpointError("unknown tensor group: " + e.name);
        auto& t = target->add(name, e.shape);
        if (e.nbytes != t.data.size() * sizeof(float) || e.offset > data.size() || e.nbytes > data.size() - e.offset)
            throw CheckpointError("checkpoint integrity error: bad extent for " + e.name);
        std::memcpy(t.data.data(), data.data() + e.offset, e.nbytes);
    }

    const auto layout = init_params<float>(c.model, 0).tensors.zeros_like();
    if (!c.params.tensors.same_layout(layout) || !c.optim.first_moment.same_layout(layout) ||
        !c.optim.second_moment.same_layout(layout) || !c.ema.shadow.tensors.same_layout(layout))
        throw CheckpointError("checkpoint tensors do not match the model configuration");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = serialize_checkpoint(checkpoint);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_checkpoint(buffer.str());
}

}  // namespace udiff
