#pragma once

// Named-array archive: the on-disk parameter checkpoint.
//
// Layout:
//   8 bytes   magic "NMDPSARC"
//   8 bytes   manifest length N, little-endian uint64
//   N bytes   UTF-8 JSON manifest:
//             {"format": 1,
//              "arrays": [{"name": str, "shape": [int...], "offset": int}],
//              "meta": <any JSON value>}
//   payload   float64 values, little-endian, concatenated in manifest order;
//             "offset" counts doubles from the start of the payload.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace nmdps {

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  bool operator==(const NamedArray&) const = default;
};

struct Archive {
  std::vector<NamedArray> arrays;
  // Serialized JSON text stored verbatim under "meta"; "null" when absent.
  std::string meta_json = "null";

  const NamedArray* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

std::string encode_archive(const Archive& archive);
Archive decode_archive(const std::string& bytes);

}  // namespace nmdps
