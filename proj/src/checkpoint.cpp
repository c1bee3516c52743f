#include "awp/checkpoint.hpp"

#include <cstring>

#include "awp/error.hpp"
#include "binio.hpp"

namespace awp {
namespace {
constexpr char kMagic[4] = {'A', 'W', 'P', 'B'};
}

std::vector<char> serialize(const Checkpoint& c) {
    binio::Writer w;
    w.bytes(kMagic, 4);
    w.put<uint16_t>(c.version);
    const auto fields = c.spec.to_fields();
    w.put<uint32_t>(static_cast<uint32_t>(fields.size()));
    for (const auto& [k, v] : fields) {
        const std::string kv = k + "=" + v;
        w.put<uint32_t>(static_cast<uint32_t>(kv.size()));
        w.bytes(kv.data(), kv.size());
    }
    w.put<uint32_t>(static_cast<uint32_t>(c.params.size()));
    for (const auto& e : c.params.entries()) {
        if (e.name.size() > 0xFFFF) throw ValidationError("parameter name too long: " + e.name);
        w.put<uint16_t>(static_cast<uint16_t>(e.name.size()));
        w.bytes(e.name.data(), e.name.size());
        w.put<uint8_t>(static_cast<uint8_t>(e.tensor.rank()));
        for (auto d : e.tensor.shape()) w.put<uint32_t>(static_cast<uint32_t>(d));
        w.floats(e.tensor.ptr(), static_cast<size_t>(e.tensor.numel()));
    }
    return w.buffer();
}

Checkpoint deserialize(const std::vector<char>& bytes, const std::string& source) {
    binio::Reader r(bytes, source);
    char magic[4];
    r.take(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(source + ": not an AWPB checkpoint (bad magic)");
    const auto version = r.get<uint16_t>("version");
    if (version != Checkpoint::kVersion) {
        throw VersionError(source + ": checkpoint version " + std::to_string(version) + ", expected " +
                           std::to_string(Checkpoint::kVersion));
    }
    const auto nfields = r.get<uint32_t>("spec field count");
    std::vector<std::pair<std::string, std::string>> fields;
    for (uint32_t i = 0; i < nfields; ++i) {
        const auto len = r.get<uint32_t>("spec field length");
        std::string kv = r.string(len, "spec field");
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw FormatError(source + ": spec field '" + kv + "' lacks '='");
        fields.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    Checkpoint c;
    c.version = version;
    c.spec = ModelSpec::from_fields(fields);
    const auto ntensors = r.get<uint32_t>("tensor count");
    for (uint32_t i = 0; i < ntensors; ++i) {
        const auto name_len = r.get<uint16_t>("tensor name length");
        std::string name = r.string(name_len, "tensor name");
        const auto rank = r.get<uint8_t>("tensor rank");
        Shape shape;
        uint64_t count = 1;
        for (uint8_t j = 0; j < rank; ++j) {
            const auto d = r.get<uint32_t>("tensor dims");
            if (d == 0) throw FormatError(source + ": tensor " + name + " has a zero dimension");
            shape.push_back(d);
            count *= d;
            if (count * sizeof(float) > r.remaining()) {
                throw TruncatedError(source + ": truncated inside tensor " + name);
            }
        }
        Tensor t(shape);
        r.take(t.ptr(), static_cast<size_t>(t.numel()) * sizeof(float), "tensor values");
        c.params.add(std::move(name), std::move(t));
    }
    if (!r.at_end()) throw FormatError(source + ": trailing bytes after last tensor");

    // The parameter layout must be the one the spec builds.
    const Model ref = build(c.spec);
    if (ref.params.size() != c.params.size()) {
        throw FormatError(source + ": " + std::to_string(c.params.size()) + " tensors, spec implies " +
                          std::to_string(ref.params.size()));
    }
    for (size_t i = 0; i < ref.params.size(); ++i) {
        const auto& want = ref.params.entries()[i];
        const auto& got = c.params.entries()[i];
        if (want.name != got.name || want.tensor.shape() != got.tensor.shape()) {
            throw FormatError(source + ": tensor " + got.name + " " + shape_str(got.tensor.shape()) +
                              " does not match spec layout " + want.name + " " + shape_str(want.tensor.shape()));
        }
    }
    return c;
}

void save(const Checkpoint& c, const std::filesystem::path& path) {
    binio::Writer w;
    const auto bytes = serialize(c);
    w.bytes(bytes.data(), bytes.size());
    w.write_file(path);
}

Checkpoint load(const std::filesystem::path& path) { return deserialize(binio::read_file(path), path.string()); }

}  // namespace awp
