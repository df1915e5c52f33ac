#include "mrp/weights.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include "json.hpp"

#include "mrp/error.hpp"

namespace mrp {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'R', 'P', 'W'};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }

    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void floats(std::vector<float>& out, std::size_t n, const char* what) {
        if (n > remaining() / 4) throw FormatError(std::string("truncated file while reading ") + what);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(u32(what));
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint32_t> shape_from_json(const json& j, const std::string& layer, const char* key) {
    if (!j.contains(key) || !j[key].is_array()) {
        throw ManifestError("layer " + layer + ": missing '" + key + "'");
    }
    return j[key].get<std::vector<std::uint32_t>>();
}

std::string dims_str(const std::vector<std::uint32_t>& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

LayerDescriptor parse_layer(const json& j, std::size_t index) {
    LayerDescriptor layer;
    layer.name = j.value("name", "layer" + std::to_string(index));
    const std::string kind = j.value("kind", "");
    layer.tap = j.value("tap", false);
    if (kind == "conv") {
        layer.kind = LayerKind::conv;
        layer.weight = j.value("weight", "");
        layer.bias = j.value("bias", "");
        if (layer.weight.empty() || layer.bias.empty()) {
            throw ManifestError("layer " + layer.name + ": conv needs 'weight' and 'bias' names");
        }
        layer.weight_shape = shape_from_json(j, layer.name, "weight_shape");
        layer.bias_shape = shape_from_json(j, layer.name, "bias_shape");
        if (layer.weight_shape.size() != 4 || layer.bias_shape.size() != 1 ||
            layer.bias_shape[0] != layer.weight_shape[0]) {
            throw ManifestError("layer " + layer.name + ": conv shapes " +
                                dims_str(layer.weight_shape) + " / " + dims_str(layer.bias_shape) +
                                " are not [out,in,kh,kw] / [out]");
        }
        layer.stride = j.value("stride", std::size_t{1});
        layer.padding = j.value("padding", std::size_t{0});
    } else if (kind == "relu") {
        layer.kind = LayerKind::relu;
    } else if (kind == "maxpool") {
        layer.kind = LayerKind::maxpool;
        layer.pool = j.value("kernel", std::size_t{0});
        layer.stride = j.value("stride", layer.pool);
        if (layer.pool == 0) throw ManifestError("layer " + layer.name + ": maxpool needs 'kernel'");
    } else {
        throw ManifestError("layer " + layer.name + ": unsupported kind '" + kind + "'");
    }
    if (layer.stride == 0) throw ManifestError("layer " + layer.name + ": stride must be >= 1");
    return layer;
}

}  // namespace

std::size_t ParamArray::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

const MrpwEntry* MrpwContainer::find(std::string_view name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const auto chunk = static_cast<uInt>(
            std::min<std::size_t>(bytes.size() - offset, std::numeric_limits<uInt>::max()));
        crc = ::crc32(crc, bytes.data() + offset, chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

MrpwContainer parse_mrpw(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMrpwHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not an MRPW file (bad magic)");
    }
    ByteReader header(bytes.subspan(4, kMrpwHeaderSize - 4));
    const std::uint32_t version = header.u32("version");
    if (version != kMrpwVersion) {
        throw FormatError("unsupported MRPW version " + std::to_string(version));
    }
    MrpwContainer out;
    out.checksum = header.u32("checksum");
    const std::uint32_t count = header.u32("entry count");
    const std::uint32_t manifest_len = header.u32("manifest length");

    const auto payload = bytes.subspan(kMrpwHeaderSize);
    const std::uint32_t actual = crc32(payload);
    if (actual != out.checksum) {
        throw CorruptionError("payload checksum mismatch (header " + std::to_string(out.checksum) +
                              ", computed " + std::to_string(actual) + ")");
    }

    ByteReader reader(payload);
    out.manifest_json = reader.str(manifest_len, "manifest");
    out.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        MrpwEntry entry;
        const std::uint32_t name_len = reader.u32("entry name length");
        entry.name = reader.str(name_len, "entry name");
        const std::uint32_t ndim = reader.u32("entry rank");
        if (ndim > 8) throw FormatError("entry " + entry.name + ": implausible rank " + std::to_string(ndim));
        entry.array.dims.resize(ndim);
        for (auto& d : entry.array.dims) d = reader.u32("entry dims");
        reader.floats(entry.array.values, entry.array.element_count(), "entry data");
        out.entries.push_back(std::move(entry));
    }
    if (reader.remaining() != 0) {
        throw FormatError(std::to_string(reader.remaining()) + " trailing bytes after last entry");
    }
    return out;
}

MrpwContainer read_mrpw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open weight file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return parse_mrpw(bytes);
    } catch (const WeightFileError& e) {
        // re-throw with the path, preserving the category
        const std::string msg = path.string() + ": " + e.what();
        if (dynamic_cast<const CorruptionError*>(&e)) throw CorruptionError(msg);
        throw FormatError(msg);
    }
}

std::vector<std::uint8_t> serialize_mrpw(std::string_view manifest_json,
                                         std::span<const MrpwEntry> entries) {
    std::vector<std::uint8_t> payload(manifest_json.begin(), manifest_json.end());
    for (const auto& e : entries) {
        if (e.array.values.size() != e.array.element_count()) {
            throw UsageError("entry " + e.name + ": data length does not match dims");
        }
        put_u32(payload, static_cast<std::uint32_t>(e.name.size()));
        payload.insert(payload.end(), e.name.begin(), e.name.end());
        put_u32(payload, static_cast<std::uint32_t>(e.array.dims.size()));
        for (auto d : e.array.dims) put_u32(payload, d);
        for (float v : e.array.values) put_u32(payload, std::bit_cast<std::uint32_t>(v));
    }
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kMrpwVersion);
    put_u32(out, crc32(payload));
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    put_u32(out, static_cast<std::uint32_t>(manifest_json.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

void write_mrpw(const std::filesystem::path& path, std::string_view manifest_json,
                std::span<const MrpwEntry> entries) {
    const auto bytes = serialize_mrpw(manifest_json, entries);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
    }
    return "?";
}

std::size_t WeightStore::block_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.tap ? 1 : 0;
    return n;
}

const ParamArray& WeightStore::param(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ManifestError("no entry named " + name);
    return it->second;
}

WeightStore WeightStore::from_container(MrpwContainer container) {
    WeightStore store;
    store.checksum_ = container.checksum;
    store.manifest_json_ = container.manifest_json;

    json manifest;
    try {
        manifest = json::parse(container.manifest_json);
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("layers") || !manifest["layers"].is_array()) {
        throw ManifestError("manifest lacks a 'layers' array");
    }

    try {
        store.backbone_ = manifest.value("backbone", "unknown");
        store.input_channels_ = manifest.value("input_channels", std::size_t{3});
        const json pre = manifest.value("preprocess", json::object());
        store.mean_ = pre.value("mean", std::vector<float>(store.input_channels_, 0.0f));
        store.std_ = pre.value("std", std::vector<float>(store.input_channels_, 1.0f));
        const auto& layers = manifest["layers"];
        for (std::size_t i = 0; i < layers.size(); ++i) store.layers_.push_back(parse_layer(layers[i], i));
    } catch (const json::exception& e) {
        throw ManifestError(std::string("malformed manifest field: ") + e.what());
    }

    if (store.input_channels_ == 0) throw ManifestError("input_channels must be >= 1");
    if (store.mean_.size() != store.input_channels_ || store.std_.size() != store.input_channels_) {
        throw ManifestError("preprocess mean/std must have one value per input channel");
    }
    for (float s : store.std_) {
        if (!(s > 0.0f) || !std::isfinite(s)) throw ManifestError("preprocess std must be positive");
    }
    for (float m : store.mean_) {
        if (!std::isfinite(m)) throw ManifestError("preprocess mean must be finite");
    }

    for (auto& e : container.entries) {
        for (float v : e.array.values) {
            if (!std::isfinite(v)) throw CorruptionError("entry " + e.name + " holds non-finite values");
        }
        const std::string name = e.name;
        if (!store.entries_.emplace(name, std::move(e.array)).second) {
            throw ManifestError("duplicate entry " + name);
        }
    }

    std::size_t channels = store.input_channels_;
    for (const auto& layer : store.layers_) {
        if (layer.kind != LayerKind::conv) continue;
        auto check = [&](const std::string& name, const std::vector<std::uint32_t>& shape) {
            auto it = store.entries_.find(name);
            if (it == store.entries_.end()) {
                throw ManifestError("layer " + layer.name + ": missing entry " + name);
            }
            if (it->second.dims != shape) {
                throw ManifestError("entry " + name + ": shape " + dims_str(it->second.dims) +
                                    " does not match manifest " + dims_str(shape));
            }
        };
        check(layer.weight, layer.weight_shape);
        check(layer.bias, layer.bias_shape);
        if (layer.weight_shape[1] != channels) {
            throw ManifestError("layer " + layer.name + ": expects " +
                                std::to_string(layer.weight_shape[1]) + " input channels but receives " +
                                std::to_string(channels));
        }
        channels = layer.weight_shape[0];
    }
    if (store.block_count() == 0) throw ManifestError("manifest declares no block taps");
    return store;
}

WeightStore load_weights(const std::filesystem::path& path) {
    auto container = read_mrpw(path);
    try {
        return WeightStore::from_container(std::move(container));
    } catch (const ManifestError& e) {
        throw ManifestError(path.string() + ": " + e.what());
    }
}

}  // namespace mrp
