#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrp {

// MRPW container: little-endian header
//   "MRPW" | version u32 (=1) | CRC32 of payload u32 | entry count u32 | manifest length u32
// followed by the payload: manifest JSON (UTF-8) then repeated entries
//   name length u32 | name | ndim u32 | dims u32 x ndim | float32 data.
inline constexpr std::uint32_t kMrpwVersion = 1;
inline constexpr std::size_t kMrpwHeaderSize = 20;

struct ParamArray {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t element_count() const;
};

struct MrpwEntry {
    std::string name;
    ParamArray array;
};

/// Raw container contents, before any manifest interpretation.
struct MrpwContainer {
    std::string manifest_json;
    std::vector<MrpwEntry> entries;
    std::uint32_t checksum = 0;

    const MrpwEntry* find(std::string_view name) const;
};

MrpwContainer read_mrpw(const std::filesystem::path& path);
MrpwContainer parse_mrpw(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_mrpw(std::string_view manifest_json,
                                         std::span<const MrpwEntry> entries);
void write_mrpw(const std::filesystem::path& path, std::string_view manifest_json,
                std::span<const MrpwEntry> entries);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

enum class LayerKind { conv, relu, maxpool };

std::string_view to_string(LayerKind kind);

struct LayerDescriptor {
    LayerKind kind = LayerKind::relu;
    std::string name;
    // conv
    std::string weight;
    std::string bias;
    std::vector<std::uint32_t> weight_shape;  // [out, in, kh, kw]
    std::vector<std::uint32_t> bias_shape;    // [out]
    std::size_t padding = 0;
    // conv and maxpool
    std::size_t stride = 1;
    // maxpool
    std::size_t pool = 0;
    bool tap = false;
};

/// Validated backbone: parameters, sequential layer manifest and preprocessing constants.
/// Immutable after load_weights.
class WeightStore {
public:
    const std::string& backbone() const { return backbone_; }
    std::size_t input_channels() const { return input_channels_; }
    const std::vector<float>& mean() const { return mean_; }
    const std::vector<float>& std_dev() const { return std_; }
    const std::vector<LayerDescriptor>& layers() const { return layers_; }
    const std::map<std::string, ParamArray>& entries() const { return entries_; }
    std::uint32_t checksum() const { return checksum_; }
    const std::string& manifest_json() const { return manifest_json_; }

    /// Number of layers flagged as block taps (B).
    std::size_t block_count() const;
    const ParamArray& param(const std::string& name) const;

    static WeightStore from_container(MrpwContainer container);

private:
    std::string backbone_;
    std::size_t input_channels_ = 0;
    std::vector<float> mean_;
    std::vector<float> std_;
    std::vector<LayerDescriptor> layers_;
    std::map<std::string, ParamArray> entries_;
    std::uint32_t checksum_ = 0;
    std::string manifest_json_;
};

WeightStore load_weights(const std::filesystem::path& path);

}  // namespace mrp
