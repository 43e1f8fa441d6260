#include "bico/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace bico {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', 'I', 'C', 'O'};
constexpr std::uint8_t kVersion = 0x01;

std::size_t shape_elements(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void append_le_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::size_t NamedTensor::element_count() const { return shape_elements(shape); }

const NamedTensor& Container::tensor(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw format_error("container missing tensor '" + name + "'", 0);
}

void write_container(const std::filesystem::path& path, const Container& c) {
    json manifest;
    manifest["kind"] = c.kind;
    manifest["meta"] = c.meta;
    json index = json::array();
    std::uint64_t offset = 0;
    for (const auto& t : c.tensors) {
        const std::size_t elems = t.element_count();
        const std::size_t esize = 8;  // f64 and i64 are both 8 bytes
        if ((t.dtype == "f64" && t.f64.size() != elems) ||
            (t.dtype == "i64" && t.i64.size() != elems))
            throw shape_error("write_container: tensor '" + t.name + "' data/shape mismatch");
        index.push_back({{"name", t.name},
                         {"shape", t.shape},
                         {"dtype", t.dtype},
                         {"byte_offset", offset},
                         {"byte_len", elems * esize}});
        offset += elems * esize;
    }
    manifest["tensors"] = index;

    const std::string body = manifest.dump();
    std::string header;
    header.append(kMagic, 4);
    header.push_back(static_cast<char>(kVersion));
    append_le_u64(header, body.size());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw argument_error("write_container: cannot open " + path.string());
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    for (const auto& t : c.tensors) {
        if (t.dtype == "f64")
            f.write(reinterpret_cast<const char*>(t.f64.data()),
                    static_cast<std::streamsize>(t.f64.size() * 8));
        else
            f.write(reinterpret_cast<const char*>(t.i64.data()),
                    static_cast<std::streamsize>(t.i64.size() * 8));
    }
    if (!f) throw argument_error("write_container: write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw argument_error("read_container: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 13) throw format_error("truncated header", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw format_error("bad magic", 0);
    if (static_cast<std::uint8_t>(bytes[4]) != kVersion)
        throw format_error("unsupported version", 4);

    std::uint64_t manifest_len = 0;
    for (int i = 0; i < 8; ++i)
        manifest_len |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes[5 + i]))
                        << (8 * i);
    const std::size_t payload_base = 13 + manifest_len;
    if (bytes.size() < payload_base) throw format_error("truncated manifest", bytes.size());

    json manifest;
    try {
        manifest = json::parse(bytes.substr(13, manifest_len));
    } catch (const json::exception&) {
        throw format_error("manifest is not valid JSON", 13);
    }

    Container c;
    c.kind = manifest.value("kind", "");
    c.meta = manifest.value("meta", json::object());
    for (const auto& e : manifest.value("tensors", json::array())) {
        NamedTensor t;
        t.name = e.at("name").get<std::string>();
        t.shape = e.at("shape").get<std::vector<std::size_t>>();
        t.dtype = e.at("dtype").get<std::string>();
        const std::uint64_t off = e.at("byte_offset").get<std::uint64_t>();
        const std::uint64_t len = e.at("byte_len").get<std::uint64_t>();
        if (t.dtype != "f64" && t.dtype != "i64")
            throw format_error("unknown dtype '" + t.dtype + "'", payload_base + off);
        if (len != t.element_count() * 8)
            throw format_error("tensor '" + t.name + "' byte_len/shape mismatch",
                               payload_base + off);
        if (payload_base + off + len > bytes.size())
            throw format_error("tensor '" + t.name + "' payload truncated",
                               payload_base + off);
        const char* src = bytes.data() + payload_base + off;
        if (t.dtype == "f64") {
            t.f64.resize(t.element_count());
            std::memcpy(t.f64.data(), src, len);
        } else {
            t.i64.resize(t.element_count());
            std::memcpy(t.i64.data(), src, len);
        }
        c.tensors.push_back(std::move(t));
    }
    return c;
}

json spec_to_json(const ModelSpec& spec) {
    json j;
    if (const auto* v = std::get_if<VectorInput>(&spec.input)) {
        j["input"] = {{"kind", "vector"}, {"dim", v->dim}};
    } else {
        const auto& img = std::get<ImageInput>(spec.input);
        j["input"] = {{"kind", "image"},
                      {"height", img.height},
                      {"width", img.width},
                      {"patch", img.patch}};
    }
    j["num_classes"] = spec.num_classes;
    j["depth"] = spec.depth;
    j["layers"] = json::array();
    for (const auto& l : spec.layers)
        j["layers"].push_back({{"name", l.name},
                               {"d_in", l.d_in},
                               {"d_out", l.d_out},
                               {"nonlinearity", to_string(l.nonlinearity)},
                               {"has_bias", l.has_bias}});
    return j;
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec spec;
    const auto& in = j.at("input");
    if (in.at("kind") == "vector")
        spec.input = VectorInput{in.at("dim").get<std::size_t>()};
    else if (in.at("kind") == "image")
        spec.input = ImageInput{in.at("height").get<std::size_t>(),
                                in.at("width").get<std::size_t>(),
                                in.at("patch").get<std::size_t>()};
    else
        throw argument_error("spec_from_json: unknown input kind");
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    spec.depth = j.at("depth").get<std::size_t>();
    for (const auto& l : j.at("layers"))
        spec.layers.push_back({l.at("name").get<std::string>(),
                               l.at("d_in").get<std::size_t>(),
                               l.at("d_out").get<std::size_t>(),
                               nonlinearity_from_string(l.at("nonlinearity")),
                               l.at("has_bias").get<bool>()});
    spec.validate();
    return spec;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    Container c;
    c.kind = "model";
    c.meta["spec"] = spec_to_json(model.spec());
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const auto& w = model.weight(l);
        c.tensors.push_back({"w" + std::to_string(l), {w.rows(), w.cols()}, "f64",
                             w.values(), {}});
        if (!model.bias(l).empty())
            c.tensors.push_back({"b" + std::to_string(l), {model.bias(l).size()}, "f64",
                                 model.bias(l), {}});
    }
    write_container(path, c);
}

Model load_checkpoint(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != "model") throw format_error("expected kind 'model', got '" + c.kind + "'", 0);
    ModelSpec spec = spec_from_json(c.meta.at("spec"));
    std::vector<DenseMatrix> weights;
    std::vector<std::vector<double>> biases;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& wt = c.tensor("w" + std::to_string(l));
        weights.emplace_back(wt.shape.at(0), wt.shape.at(1), wt.f64);
        if (spec.layers[l].has_bias)
            biases.push_back(c.tensor("b" + std::to_string(l)).f64);
        else
            biases.emplace_back();
    }
    return Model(std::move(spec), std::move(weights), std::move(biases));
}

void save_dataset(const Batch& data, const std::filesystem::path& path) {
    Container c;
    c.kind = "dataset";
    c.tensors.push_back({"inputs", {data.inputs.rows(), data.inputs.cols()}, "f64",
                         data.inputs.values(), {}});
    c.tensors.push_back({"labels", {data.labels.size()}, "i64", {}, data.labels});
    write_container(path, c);
}

Batch load_dataset(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != "dataset")
        throw format_error("expected kind 'dataset', got '" + c.kind + "'", 0);
    const auto& in = c.tensor("inputs");
    Batch b;
    b.inputs = DenseMatrix(in.shape.at(0), in.shape.at(1), in.f64);
    b.inputs.require_finite("load_dataset");
    b.labels = c.tensor("labels").i64;
    if (b.labels.size() != b.inputs.rows())
        throw format_error("dataset labels/inputs row mismatch", 0);
    return b;
}

}  // namespace bico
