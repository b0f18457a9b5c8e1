#include "nmdps/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "json.hpp"
#include "nmdps/error.hpp"

namespace nmdps {

namespace {

constexpr char kMagic[8] = {'N', 'M', 'D', 'P', 'S', 'A', 'R', 'C'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

const NamedArray* Archive::find(const std::string& name) const {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::string encode_archive(const Archive& archive) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  std::unordered_set<std::string> names;
  for (const NamedArray& a : archive.arrays) {
    std::size_t count = 1;
    for (std::size_t d : a.shape) count *= d;
    if (count != a.values.size()) {
      throw Error("archive: array '" + a.name + "' has " + std::to_string(a.values.size()) +
                  " values but its shape holds " + std::to_string(count));
    }
    if (!names.insert(a.name).second) throw Error("archive: duplicate array name '" + a.name + "'");
    manifest["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += count;
  }
  manifest["meta"] = nlohmann::json::parse(archive.meta_json);
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 8);
  for (const NamedArray& a : archive.arrays) {
    for (double v : a.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Archive decode_archive(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ParseError("archive: bad magic header", 0);
  }
  const std::uint64_t len = get_u64(bytes, 8);
  if (len > bytes.size() - 16) throw ParseError("archive: truncated manifest", 0);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("archive: malformed manifest: ") + e.what(), 0);
  }
  const std::size_t payload = 16 + len;
  Archive archive;
  archive.meta_json = manifest.value("meta", nlohmann::json()).dump();
  try {
    for (const auto& entry : manifest.at("arrays")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      std::size_t count = 1;
      for (std::size_t d : a.shape) count *= d;
      if (payload + (offset + count) * 8 > bytes.size()) {
        throw ParseError("archive: payload too short for array '" + a.name + "'", 0);
      }
      a.values.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        a.values[i] = std::bit_cast<double>(get_u64(bytes, payload + (offset + i) * 8));
      }
      archive.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("archive: malformed manifest: ") + e.what(), 0);
  }
  return archive;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  const std::string bytes = encode_archive(archive);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write archive '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open archive '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

}  // namespace nmdps
