#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bico/model.hpp"

namespace bico {

/// One tensor inside a BICO container. Exactly one of f64/i64 is populated,
/// matching dtype ("f64" or "i64").
struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::string dtype = "f64";
    std::vector<double> f64;
    std::vector<std::int64_t> i64;

    std::size_t element_count() const;
};

/// In-memory form of the on-disk container:
/// "BICO" magic, version byte 0x01, u64-LE manifest length, UTF-8 JSON
/// manifest {kind, meta, tensor index}, then little-endian payloads at
/// offsets relative to the end of the manifest.
struct Container {
    std::string kind;
    nlohmann::json meta;
    std::vector<NamedTensor> tensors;

    const NamedTensor& tensor(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

void save_dataset(const Batch& data, const std::filesystem::path& path);
Batch load_dataset(const std::filesystem::path& path);

}  // namespace bico
