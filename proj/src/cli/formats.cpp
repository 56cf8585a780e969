#include "rwlp/formats.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rwlp/errors.hpp"

namespace rwlp::io {

namespace {

constexpr char kMagic[4] = {'R', 'W', 'F', '1'};
constexpr std::size_t kHeaderBytes = 16;

void putU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t getU32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

std::int64_t requireInt(const nlohmann::json& obj, const std::string& key,
                        const std::string& where) {
  const std::string name = where.empty() ? key : where + "." + key;
  if (!obj.contains(key)) throw ValidationError("missing field '" + name + "'");
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError("field '" + name + "' must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace

std::string encodeField(const FieldFile& field) {
  const std::size_t count =
      static_cast<std::size_t>(field.width) * field.height * field.channels;
  if (field.data.size() != count) throw ContractError("field data length mismatch");
  std::string out(kMagic, 4);
  putU32(out, field.width);
  putU32(out, field.height);
  putU32(out, field.channels);
  out.reserve(kHeaderBytes + 4 * count);
  for (float f : field.data) putU32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FieldFile decodeField(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ValidationError("not an RWF1 field file");
  }
  FieldFile f;
  f.width = getU32(bytes, 4);
  f.height = getU32(bytes, 8);
  f.channels = getU32(bytes, 12);
  const std::size_t count = static_cast<std::size_t>(f.width) * f.height * f.channels;
  if (bytes.size() != kHeaderBytes + 4 * count) {
    std::ostringstream os;
    os << "RWF1 payload is " << bytes.size() - kHeaderBytes << " bytes, header implies "
       << 4 * count;
    throw ValidationError(os.str());
  }
  f.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    f.data[i] = std::bit_cast<float>(getU32(bytes, kHeaderBytes + 4 * i));
  }
  return f;
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeFile(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

FieldFile readField(const std::filesystem::path& path) {
  try {
    return decodeField(readFile(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void writeField(const std::filesystem::path& path, const FieldFile& field) {
  writeFile(path, encodeField(field));
}

FieldFile toField(const GridLattice& lattice, std::size_t channels,
                  std::span<const double> values) {
  if (values.size() != lattice.size() * channels) {
    throw ContractError("toField: value count does not match lattice and channels");
  }
  FieldFile f{static_cast<std::uint32_t>(lattice.width()),
              static_cast<std::uint32_t>(lattice.height()),
              static_cast<std::uint32_t>(channels), {}};
  f.data.reserve(values.size());
  for (double v : values) f.data.push_back(static_cast<float>(v));
  return f;
}

LabelsDocument parseLabels(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("labels document must be a JSON object");
  const auto width = requireInt(doc, "width", "");
  const auto height = requireInt(doc, "height", "");
  const auto classes = requireInt(doc, "numClasses", "");
  if (width < 1) throw ValidationError("field 'width' must be positive");
  if (height < 1) throw ValidationError("field 'height' must be positive");
  if (width > std::numeric_limits<std::uint32_t>::max() ||
      height > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("lattice dimensions too large");
  }
  if (classes < 1 || classes > static_cast<std::int64_t>(kMaxClasses)) {
    throw ValidationError("field 'numClasses' must be in [1, 255]");
  }
  if (!doc.contains("entries") || !doc.at("entries").is_array()) {
    throw ValidationError("field 'entries' must be an array");
  }

  GridLattice lattice(static_cast<std::size_t>(width), static_cast<std::size_t>(height));
  std::vector<LabelEntry> entries;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  const auto& list = doc.at("entries");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "entries[" + std::to_string(i) + "]";
    const auto& e = list[i];
    if (!e.is_object()) throw ValidationError("field '" + where + "' must be an object");
    const auto x = requireInt(e, "x", where);
    const auto y = requireInt(e, "y", where);
    const auto c = requireInt(e, "class", where);
    if (x < 0 || x >= width) throw ValidationError("field '" + where + ".x' out of range");
    if (y < 0 || y >= height) throw ValidationError("field '" + where + ".y' out of range");
    if (c < 0 || c >= classes) {
      throw ValidationError("field '" + where + ".class' must be in [0, numClasses)");
    }
    if (!seen.insert({x, y}).second) {
      throw ValidationError("field '" + where + "' duplicates pixel (" + std::to_string(x) +
                            ", " + std::to_string(y) + ")");
    }
    entries.push_back({lattice.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y)),
                       static_cast<ClassId>(c)});
  }
  SparseLabels labels(lattice, static_cast<std::size_t>(classes), std::move(entries));
  return {lattice, std::move(labels)};
}

LabelsDocument readLabels(const std::filesystem::path& path) {
  const std::string text = readFile(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
  try {
    return parseLabels(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

nlohmann::json labelsToJson(const GridLattice& lattice, const SparseLabels& labels) {
  nlohmann::json entries = nlohmann::json::array();
  for (const LabelEntry& e : labels.entries()) {
    const Point c = lattice.coords(e.pixel);
    entries.push_back({{"x", c.x}, {"y", c.y}, {"class", e.label}});
  }
  return {{"width", lattice.width()},
          {"height", lattice.height()},
          {"numClasses", labels.numClasses()},
          {"entries", std::move(entries)}};
}

void writeLabels(const std::filesystem::path& path, const GridLattice& lattice,
                 const SparseLabels& labels) {
  writeFile(path, labelsToJson(lattice, labels).dump(2) + "\n");
}

std::string encodePgm(const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw ContractError("PGM pixel count mismatch");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

GrayImage decodePgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  auto number = [&](const char* what) -> std::uint32_t {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
      throw ValidationError(std::string("PGM header: bad ") + what);
    }
  };
  if (token() != "P5") throw ValidationError("not a binary PGM (P5) image");
  GrayImage img;
  img.width = number("width");
  img.height = number("height");
  if (number("maxval") != 255) throw ValidationError("PGM maxval must be 255");
  ++pos;  // single whitespace before the raster
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  if (pos > bytes.size() || bytes.size() - pos != count) {
    throw ValidationError("PGM raster size does not match its header");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

GrayImage readPgm(const std::filesystem::path& path) {
  try {
    return decodePgm(readFile(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void writePgm(const std::filesystem::path& path, const GrayImage& image) {
  writeFile(path, encodePgm(image));
}

GrayImage mapImage(const GridLattice& lattice, std::span<const ClassId> map) {
  if (map.size() != lattice.size()) throw ContractError("mapImage: size mismatch");
  GrayImage img{static_cast<std::uint32_t>(lattice.width()),
                static_cast<std::uint32_t>(lattice.height()), {}};
  img.pixels.reserve(map.size());
  for (ClassId c : map) {
    if (c > kMaxClasses) throw ContractError("class id does not fit a grey level");
    img.pixels.push_back(static_cast<std::uint8_t>(c));
  }
  return img;
}

}  // namespace rwlp::io
