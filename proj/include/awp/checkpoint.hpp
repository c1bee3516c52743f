#pragma once

#include <filesystem>
#include <vector>

#include "awp/model.hpp"

namespace awp {

/// AWPB checkpoint: a model spec plus its parameters.
///
/// Layout (all integers little-endian):
///   "AWPB" | u16 version | u32 field count | per field: u32 length, UTF-8 "key=value"
///   | u32 tensor count | per tensor: u16 name length, name, u8 rank, u32 dims..., f32 values...
struct Checkpoint {
    static constexpr uint16_t kVersion = 1;

    ModelSpec spec;
    ParameterSet params;
    uint16_t version = kVersion;

    static Checkpoint of(const Model& m) { return Checkpoint{m.spec, m.params.clone(), kVersion}; }
    Model model() const { return Model{spec, params.clone()}; }
};

std::vector<char> serialize(const Checkpoint& c);
/// Throws FormatError (magic), VersionError, TruncatedError; never returns a
/// partially filled checkpoint.
Checkpoint deserialize(const std::vector<char>& bytes, const std::string& source = "checkpoint");

void save(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

}  // namespace awp
