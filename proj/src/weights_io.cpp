#include "pointvox/weights_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

namespace pointvox::io {

namespace {

constexpr const char* kFormat = "pointvox-weights-v1";

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

void put_f32(std::ostream& out, float v) {
  std::array<char, 4> b;
  std::memcpy(b.data(), &v, 4);
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.write(b.data(), 4);
}

float get_f32(const std::vector<char>& blob, std::size_t offset) {
  std::array<char, 4> b;
  std::memcpy(b.data(), blob.data() + offset, 4);
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  float v;
  std::memcpy(&v, b.data(), 4);
  return v;
}

std::string tensor_name(std::size_t block, const std::string& name) {
  return "block" + std::to_string(block) + "." + name;
}

}  // namespace

void save_weights(const std::filesystem::path& stem, std::vector<AttentionWeights> blocks) {
  std::ofstream blob(with_suffix(stem, ".bin"), std::ios::binary);
  if (!blob) throw Error(ErrorCode::Io, "cannot write weight blob for " + stem.string());
  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["dtype"] = "float32";
  manifest["endianness"] = "little";
  manifest["blocks"] = nlohmann::json::array();
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& w = blocks[b];
    w.validate();
    manifest["blocks"].push_back({{"dim", w.dim}, {"heads", w.heads}, {"ffn_dim", w.ffn_dim}});
    for (const auto& t : w.tensors()) {
      const auto count = static_cast<std::size_t>(t.rows * t.cols);
      manifest["tensors"].push_back(
          {{"name", tensor_name(b, t.name)}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
      for (std::size_t i = 0; i < count; ++i) put_f32(blob, static_cast<float>(t.data[i]));
      offset += count * 4;
    }
  }
  if (!blob) throw Error(ErrorCode::Io, "weight blob write failed");
  std::ofstream json_out(with_suffix(stem, ".json"));
  if (!json_out) throw Error(ErrorCode::Io, "cannot write weight manifest for " + stem.string());
  json_out << manifest.dump(2) << '\n';
}

std::vector<AttentionWeights> load_weights(const std::filesystem::path& stem) {
  std::ifstream json_in(with_suffix(stem, ".json"));
  if (!json_in) throw Error(ErrorCode::Io, "cannot read weight manifest for " + stem.string());
  nlohmann::json manifest;
  try {
    json_in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("weight manifest: ") + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw Error(ErrorCode::Io, "weight manifest: unknown format");

  std::ifstream blob_in(with_suffix(stem, ".bin"), std::ios::binary);
  if (!blob_in) throw Error(ErrorCode::Io, "cannot read weight blob for " + stem.string());
  const std::vector<char> blob((std::istreambuf_iterator<char>(blob_in)), std::istreambuf_iterator<char>());

  std::vector<AttentionWeights> blocks;
  for (const auto& b : manifest.at("blocks")) {
    blocks.push_back(AttentionWeights::seeded(0, b.at("dim").get<Eigen::Index>(), b.at("heads").get<Eigen::Index>(),
                                              b.at("ffn_dim").get<Eigen::Index>()));
  }
  std::size_t next = 0;
  const auto& entries = manifest.at("tensors");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& t : blocks[b].tensors()) {
      if (next >= entries.size()) throw Error(ErrorCode::Io, "weight manifest: missing tensors");
      const auto& e = entries[next++];
      if (e.at("name").get<std::string>() != tensor_name(b, t.name)) {
        throw Error(ErrorCode::Io, "weight manifest: expected tensor " + tensor_name(b, t.name));
      }
      const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols) {
        throw Error(ErrorCode::ShapeMismatch, "weight manifest: bad shape for " + tensor_name(b, t.name));
      }
      const auto offset = e.at("offset").get<std::size_t>();
      const auto count = static_cast<std::size_t>(t.rows * t.cols);
      if (offset + count * 4 > blob.size()) throw Error(ErrorCode::Io, "weight blob is truncated");
      for (std::size_t i = 0; i < count; ++i) t.data[i] = get_f32(blob, offset + 4 * i);
    }
  }
  if (next != entries.size()) throw Error(ErrorCode::Io, "weight manifest: unexpected extra tensors");
  return blocks;
}

}  // namespace pointvox::io
