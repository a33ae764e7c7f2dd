#include "pcstream/ply.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "pcstream/bytes.hpp"
#include "pcstream/errors.hpp"

namespace pcstream {
namespace {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<Scalar> parse_scalar(const std::string& name) {
  if (name == "char" || name == "int8") return Scalar::i8;
  if (name == "uchar" || name == "uint8") return Scalar::u8;
  if (name == "short" || name == "int16") return Scalar::i16;
  if (name == "ushort" || name == "uint16") return Scalar::u16;
  if (name == "int" || name == "int32") return Scalar::i32;
  if (name == "uint" || name == "uint32") return Scalar::u32;
  if (name == "float" || name == "float32") return Scalar::f32;
  if (name == "double" || name == "float64") return Scalar::f64;
  return std::nullopt;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8:
      return 1;
    case Scalar::i16:
    case Scalar::u16:
      return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32:
      return 4;
    case Scalar::f64:
      return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::u8;
  bool is_list = false;
  Scalar count_type = Scalar::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  PlyFormat format = PlyFormat::ascii;
  std::vector<Element> elements;
  std::optional<std::uint32_t> resolution;
  std::optional<std::uint64_t> frame_id;
};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw ParseError(path.string() + ": " + what);
}

template <typename T>
T parse_number(const std::filesystem::path& path, const std::string& token, const char* what) {
  std::istringstream in(token);
  T value{};
  in >> value;
  if (in.fail() || !in.eof()) fail(path, std::string("bad ") + what + " '" + token + "'");
  return value;
}

Header read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) fail(path, "missing 'ply' magic line");

  Header header;
  bool saw_format = false;
  for (;;) {
    if (!std::getline(in, line)) fail(path, "header not terminated by end_header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream words(line);
    std::string keyword;
    words >> keyword;
    if (keyword.empty()) continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string kind;
      std::string version;
      words >> kind >> version;
      if (kind == "ascii") {
        header.format = PlyFormat::ascii;
      } else if (kind == "binary_little_endian") {
        header.format = PlyFormat::binary_little_endian;
      } else {
        fail(path, "unsupported format '" + kind + "'");
      }
      saw_format = true;
    } else if (keyword == "comment" || keyword == "obj_info") {
      std::string key;
      std::string value;
      words >> key >> value;
      if (keyword == "comment" && key == "resolution" && !value.empty()) {
        header.resolution = parse_number<std::uint32_t>(path, value, "resolution comment");
      } else if (keyword == "comment" && key == "frame_id" && !value.empty()) {
        header.frame_id = parse_number<std::uint64_t>(path, value, "frame_id comment");
      }
    } else if (keyword == "element") {
      Element element;
      std::string count;
      words >> element.name >> count;
      if (element.name.empty() || count.empty()) fail(path, "malformed element line '" + line + "'");
      element.count = parse_number<std::size_t>(path, count, "element count");
      header.elements.push_back(std::move(element));
    } else if (keyword == "property") {
      if (header.elements.empty()) fail(path, "property declared before any element");
      Property property;
      std::string type;
      words >> type;
      if (type == "list") {
        std::string count_type;
        std::string item_type;
        words >> count_type >> item_type >> property.name;
        auto ct = parse_scalar(count_type);
        auto it = parse_scalar(item_type);
        if (!ct || !it) fail(path, "bad list property '" + line + "'");
        property.is_list = true;
        property.count_type = *ct;
        property.type = *it;
      } else {
        words >> property.name;
        auto st = parse_scalar(type);
        if (!st) fail(path, "unknown property type '" + type + "'");
        property.type = *st;
      }
      if (property.name.empty()) fail(path, "property without a name");
      header.elements.back().properties.push_back(std::move(property));
    } else {
      fail(path, "unknown header keyword '" + keyword + "'");
    }
  }
  if (!saw_format) fail(path, "missing format line");
  return header;
}

// Field slots in the vertex element we care about.
enum Slot { kX, kY, kZ, kR, kG, kB, kSlotCount };

struct VertexLayout {
  std::size_t element_index = 0;
  std::array<std::optional<std::size_t>, kSlotCount> slot_property;
};

VertexLayout resolve_vertex_layout(const Header& header, const std::filesystem::path& path) {
  VertexLayout layout;
  bool found = false;
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    if (header.elements[e].name == "vertex") {
      layout.element_index = e;
      found = true;
      break;
    }
  }
  if (!found) fail(path, "no vertex element");

  const Element& vertex = header.elements[layout.element_index];
  auto assign = [&](Slot slot, std::size_t property_index) {
    if (layout.slot_property[slot]) fail(path, "duplicate vertex property '" + vertex.properties[property_index].name + "'");
    layout.slot_property[slot] = property_index;
  };
  for (std::size_t p = 0; p < vertex.properties.size(); ++p) {
    const std::string& name = vertex.properties[p].name;
    if (name == "x") assign(kX, p);
    else if (name == "y") assign(kY, p);
    else if (name == "z") assign(kZ, p);
    else if (name == "r" || name == "red") assign(kR, p);
    else if (name == "g" || name == "green") assign(kG, p);
    else if (name == "b" || name == "blue") assign(kB, p);
  }

  static constexpr std::array<const char*, kSlotCount> kSlotNames = {"x", "y", "z", "red/r", "green/g", "blue/b"};
  for (int s = 0; s < kSlotCount; ++s) {
    if (!layout.slot_property[s]) fail(path, std::string("vertex element lacks property ") + kSlotNames[s]);
    const Property& prop = vertex.properties[*layout.slot_property[s]];
    if (prop.is_list) fail(path, "vertex property '" + prop.name + "' must be a scalar");
    if (s >= kR && prop.type != Scalar::u8) fail(path, "color property '" + prop.name + "' must be 8-bit unsigned");
  }
  return layout;
}

class BinaryCursor {
 public:
  BinaryCursor(ByteView data, const std::filesystem::path& path) : data_(data), path_(path) {}

  double read(Scalar type) {
    const std::size_t n = scalar_size(type);
    if (offset_ + n > data_.size()) fail(path_, "binary body truncated");
    double value = 0;
    switch (type) {
      case Scalar::i8:
        value = static_cast<std::int8_t>(data_[offset_]);
        break;
      case Scalar::u8:
        value = data_[offset_];
        break;
      case Scalar::i16:
        value = static_cast<std::int16_t>(get_le<std::uint16_t>(data_, offset_));
        break;
      case Scalar::u16:
        value = get_le<std::uint16_t>(data_, offset_);
        break;
      case Scalar::i32:
        value = static_cast<std::int32_t>(get_le<std::uint32_t>(data_, offset_));
        break;
      case Scalar::u32:
        value = get_le<std::uint32_t>(data_, offset_);
        break;
      case Scalar::f32: {
        const std::uint32_t bits = get_le<std::uint32_t>(data_, offset_);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        value = f;
        break;
      }
      case Scalar::f64: {
        const std::uint64_t bits = get_le<std::uint64_t>(data_, offset_);
        std::memcpy(&value, &bits, sizeof value);
        break;
      }
    }
    offset_ += n;
    return value;
  }

 private:
  ByteView data_;
  const std::filesystem::path& path_;
  std::size_t offset_ = 0;
};

std::uint32_t checked_coordinate(double value, std::uint32_t resolution, std::size_t vertex, const char* axis) {
  if (!std::isfinite(value) || std::floor(value) != value) {
    throw ValidationError("vertex " + std::to_string(vertex) + ": non-integral " + axis + " coordinate", vertex);
  }
  if (value < 0 || value >= static_cast<double>(resolution)) {
    throw ValidationError("vertex " + std::to_string(vertex) + ": " + axis + " coordinate " +
                              std::to_string(static_cast<long long>(value)) + " outside [0, " +
                              std::to_string(resolution) + ")",
                          vertex);
  }
  return static_cast<std::uint32_t>(value);
}

Point make_point(const std::array<double, kSlotCount>& v, std::uint32_t resolution, std::size_t vertex) {
  Point p;
  p.x = checked_coordinate(v[kX], resolution, vertex, "x");
  p.y = checked_coordinate(v[kY], resolution, vertex, "y");
  p.z = checked_coordinate(v[kZ], resolution, vertex, "z");
  p.r = static_cast<std::uint8_t>(v[kR]);
  p.g = static_cast<std::uint8_t>(v[kG]);
  p.b = static_cast<std::uint8_t>(v[kB]);
  return p;
}

std::vector<Point> read_ascii_body(std::istream& in, const Header& header, const VertexLayout& layout,
                                   std::uint32_t resolution, const std::filesystem::path& path) {
  std::string line;
  for (std::size_t e = 0; e < layout.element_index; ++e) {
    for (std::size_t i = 0; i < header.elements[e].count; ++i) {
      if (!std::getline(in, line)) fail(path, "ascii body truncated in element '" + header.elements[e].name + "'");
    }
  }

  const Element& vertex = header.elements[layout.element_index];
  std::vector<std::optional<Slot>> slot_of(vertex.properties.size());
  for (int s = 0; s < kSlotCount; ++s) slot_of[*layout.slot_property[s]] = static_cast<Slot>(s);

  std::vector<Point> points;
  points.reserve(vertex.count);
  for (std::size_t i = 0; i < vertex.count; ++i) {
    if (!std::getline(in, line)) fail(path, "ascii body truncated at vertex " + std::to_string(i));
    std::istringstream tokens(line);
    std::array<double, kSlotCount> values{};
    for (std::size_t p = 0; p < vertex.properties.size(); ++p) {
      const Property& prop = vertex.properties[p];
      std::size_t items = 1;
      if (prop.is_list) {
        double count = 0;
        if (!(tokens >> count)) fail(path, "vertex " + std::to_string(i) + ": missing list count");
        items = static_cast<std::size_t>(count);
      }
      for (std::size_t k = 0; k < items; ++k) {
        std::string token;
        if (!(tokens >> token)) fail(path, "vertex " + std::to_string(i) + ": too few values");
        char* end = nullptr;
        const double value = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0') fail(path, "vertex " + std::to_string(i) + ": bad number '" + token + "'");
        if (!prop.is_list && slot_of[p]) values[*slot_of[p]] = value;
      }
    }
    points.push_back(make_point(values, resolution, i));
  }
  return points;
}

std::vector<Point> read_binary_body(std::istream& in, const Header& header, const VertexLayout& layout,
                                    std::uint32_t resolution, const std::filesystem::path& path) {
  const Bytes body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  BinaryCursor cursor(body, path);

  auto skip_element = [&](const Element& element) {
    for (std::size_t i = 0; i < element.count; ++i) {
      for (const Property& prop : element.properties) {
        const std::size_t items = prop.is_list ? static_cast<std::size_t>(cursor.read(prop.count_type)) : 1;
        for (std::size_t k = 0; k < items; ++k) cursor.read(prop.type);
      }
    }
  };
  for (std::size_t e = 0; e < layout.element_index; ++e) skip_element(header.elements[e]);

  const Element& vertex = header.elements[layout.element_index];
  std::vector<std::optional<Slot>> slot_of(vertex.properties.size());
  for (int s = 0; s < kSlotCount; ++s) slot_of[*layout.slot_property[s]] = static_cast<Slot>(s);

  std::vector<Point> points;
  points.reserve(vertex.count);
  for (std::size_t i = 0; i < vertex.count; ++i) {
    std::array<double, kSlotCount> values{};
    for (std::size_t p = 0; p < vertex.properties.size(); ++p) {
      const Property& prop = vertex.properties[p];
      if (prop.is_list) {
        const auto items = static_cast<std::size_t>(cursor.read(prop.count_type));
        for (std::size_t k = 0; k < items; ++k) cursor.read(prop.type);
        continue;
      }
      const double value = cursor.read(prop.type);
      if (slot_of[p]) values[*slot_of[p]] = value;
    }
    points.push_back(make_point(values, resolution, i));
  }
  return points;
}

}  // namespace

PointCloud load_ply(const std::filesystem::path& path, const PlyLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open for reading");

  const Header header = read_header(in, path);
  const VertexLayout layout = resolve_vertex_layout(header, path);
  const std::uint32_t resolution = options.resolution.value_or(header.resolution.value_or(kDefaultResolution));
  if (resolution == 0) fail(path, "resolution must be positive");
  const std::uint64_t frame_id = options.frame_id.value_or(header.frame_id.value_or(0));

  std::vector<Point> points = header.format == PlyFormat::ascii
                                  ? read_ascii_body(in, header, layout, resolution, path)
                                  : read_binary_body(in, header, layout, resolution, path);
  return PointCloud(resolution, frame_id, std::move(points));
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path, PlyFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");

  out << "ply\n"
      << (format == PlyFormat::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "comment resolution " << cloud.resolution() << "\n"
      << "comment frame_id " << cloud.frame_id() << "\n"
      << "element vertex " << cloud.size() << "\n"
      << "property uint x\nproperty uint y\nproperty uint z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";

  if (format == PlyFormat::ascii) {
    for (const Point& p : cloud.points()) {
      out << p.x << ' ' << p.y << ' ' << p.z << ' ' << unsigned{p.r} << ' ' << unsigned{p.g} << ' ' << unsigned{p.b}
          << '\n';
    }
  } else {
    Bytes body;
    body.reserve(cloud.size() * 15);
    for (const Point& p : cloud.points()) {
      put_le(body, p.x);
      put_le(body, p.y);
      put_le(body, p.z);
      body.push_back(p.r);
      body.push_back(p.g);
      body.push_back(p.b);
    }
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  }
  out.flush();
  if (!out) throw Error(path.string() + ": write failed");
}

}  // namespace pcstream
