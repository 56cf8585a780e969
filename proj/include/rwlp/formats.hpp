#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rwlp/lattice.hpp"

namespace rwlp::io {

/// RWF1 float field: "RWF1", u32 width, u32 height, u32 channels (all
/// little-endian), then width*height*channels little-endian float32 values,
/// row-major with channels fastest.
struct FieldFile {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  friend bool operator==(const FieldFile&, const FieldFile&) = default;
};

std::string encodeField(const FieldFile& field);
FieldFile decodeField(std::string_view bytes);

FieldFile readField(const std::filesystem::path& path);
void writeField(const std::filesystem::path& path, const FieldFile& field);

FieldFile toField(const GridLattice& lattice, std::size_t channels, std::span<const double> values);

/// Sparse labels document:
///   {"width": W, "height": H, "numClasses": K,
///    "entries": [{"x": int, "y": int, "class": int}, ...]}
struct LabelsDocument {
  GridLattice lattice;
  SparseLabels labels;
};

inline constexpr std::size_t kMaxClasses = 255;

/// Throws ValidationError naming the offending field.
LabelsDocument parseLabels(const nlohmann::json& doc);
LabelsDocument readLabels(const std::filesystem::path& path);
nlohmann::json labelsToJson(const GridLattice& lattice, const SparseLabels& labels);
void writeLabels(const std::filesystem::path& path, const GridLattice& lattice,
                 const SparseLabels& labels);

/// Binary greyscale PGM (P5, maxval 255).
struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
};

std::string encodePgm(const GrayImage& image);
GrayImage decodePgm(std::string_view bytes);
GrayImage readPgm(const std::filesystem::path& path);
void writePgm(const std::filesystem::path& path, const GrayImage& image);

GrayImage mapImage(const GridLattice& lattice, std::span<const ClassId> map);

std::string readFile(const std::filesystem::path& path);
void writeFile(const std::filesystem::path& path, std::string_view bytes);

}  // namespace rwlp::io
