#include "orthosplat/ply.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "orthosplat/error.hpp"

namespace orthosplat::io {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

struct Property {
  std::string name;
  std::string type;
  int size = 0;
  std::size_t offset = 0;
};

int type_size(const std::string &type) {
  static const std::map<std::string, int> sizes = {
      {"char", 1},   {"uchar", 1},  {"int8", 1},    {"uint8", 1},   {"short", 2},
      {"ushort", 2}, {"int16", 2},  {"uint16", 2},  {"int", 4},     {"uint", 4},
      {"int32", 4},  {"uint32", 4}, {"float", 4},   {"float32", 4}, {"double", 8},
      {"float64", 8}};
  auto it = sizes.find(type);
  return it == sizes.end() ? 0 : it->second;
}

double decode(const std::uint8_t *p, const std::string &type) {
  auto load = [&](auto tag) {
    decltype(tag) v;
    std::memcpy(&v, p, sizeof v);
    return static_cast<double>(v);
  };
  if (type == "float" || type == "float32")
    return load(float{});
  if (type == "double" || type == "float64")
    return load(double{});
  if (type == "char" || type == "int8")
    return load(std::int8_t{});
  if (type == "uchar" || type == "uint8")
    return load(std::uint8_t{});
  if (type == "short" || type == "int16")
    return load(std::int16_t{});
  if (type == "ushort" || type == "uint16")
    return load(std::uint16_t{});
  if (type == "int" || type == "int32")
    return load(std::int32_t{});
  return load(std::uint32_t{});
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
  std::size_t stride = 0;
};

} // namespace

core::SplatScene read_splat_ply(const std::filesystem::path &path) {
  static_assert(std::endian::native == std::endian::little, "PLY decoding assumes a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  const std::string where = "'" + path.string() + "': ";

  std::string line;
  std::getline(in, line);
  if (line != "ply")
    throw SchemaError(where + "missing 'ply' magic");
  std::vector<Element> elements;
  std::string crs_note;
  bool format_ok = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header")
      break;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian")
        throw SchemaError(where + "unsupported PLY format '" + fmt + "'");
      format_ok = true;
    } else if (key == "comment") {
      const std::string prefix = "comment crs: ";
      if (line.rfind(prefix, 0) == 0)
        crs_note = line.substr(prefix.size());
    } else if (key == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(std::move(e));
    } else if (key == "property") {
      if (elements.empty())
        throw SchemaError(where + "property before any element");
      Property p;
      ls >> p.type;
      if (p.type == "list")
        throw SchemaError(where + "list properties are not supported");
      ls >> p.name;
      p.size = type_size(p.type);
      if (p.size == 0)
        throw SchemaError(where + "unknown property type '" + p.type + "'");
      auto &e = elements.back();
      p.offset = e.stride;
      e.stride += p.size;
      e.props.push_back(std::move(p));
    }
  }
  if (!format_ok)
    throw SchemaError(where + "missing format line");

  // Skip elements preceding the vertices.
  const Element *vertex = nullptr;
  for (const auto &e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    in.seekg(static_cast<std::streamoff>(e.count * e.stride), std::ios::cur);
  }
  if (!vertex)
    throw SchemaError(where + "no vertex element");

  std::map<std::string, const Property *> by_name;
  for (const auto &p : vertex->props)
    by_name[p.name] = &p;
  auto require = [&](const std::string &name) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw SchemaError(where + "missing required property '" + name + "'");
    return it->second;
  };
  const std::vector<std::string> required = {"x",       "y",       "z",       "f_dc_0", "f_dc_1",
                                             "f_dc_2",  "opacity", "scale_0", "scale_1", "rot_0",
                                             "rot_1",   "rot_2",   "rot_3"};
  std::vector<const Property *> req;
  for (const auto &name : required)
    req.push_back(require(name));

  int rest = 0;
  while (by_name.count("f_rest_" + std::to_string(rest)))
    ++rest;
  int degree = -1;
  for (int d = 0; d <= core::kMaxShDegree; ++d)
    if (rest == 3 * (core::sh_coeff_count(d) - 1))
      degree = d;
  if (degree < 0)
    throw SchemaError(where + "unsupported f_rest count " + std::to_string(rest));
  const int per_channel = core::sh_coeff_count(degree) - 1;
  std::vector<const Property *> rest_props;
  for (int i = 0; i < rest; ++i)
    rest_props.push_back(by_name["f_rest_" + std::to_string(i)]);

  core::SplatScene scene(degree);
  if (!crs_note.empty())
    scene.crs_note = crs_note;
  scene.reserve(vertex->count);
  std::vector<std::uint8_t> record(vertex->stride);
  for (std::size_t i = 0; i < vertex->count; ++i) {
    if (!in.read(reinterpret_cast<char *>(record.data()),
                 static_cast<std::streamsize>(record.size())))
      throw SchemaError(where + "truncated vertex data at record " + std::to_string(i));
    auto get = [&](const Property *p) {
      const double v = decode(record.data() + p->offset, p->type);
      if (!std::isfinite(v))
        throw SchemaError(where + "non-finite '" + p->name + "' at record " + std::to_string(i));
      return v;
    };
    const Eigen::Vector3d center{get(req[0]), get(req[1]), get(req[2])};
    std::vector<Eigen::Vector3d> coeffs(core::sh_coeff_count(degree));
    coeffs[0] = {get(req[3]), get(req[4]), get(req[5])};
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < per_channel; ++k)
        coeffs[k + 1][c] = get(rest_props[c * per_channel + k]);
    const double opacity = sigmoid(get(req[6]));
    const Eigen::Vector2d scales{std::exp(get(req[7])), std::exp(get(req[8]))};
    const Eigen::Quaterniond q(get(req[9]), get(req[10]), get(req[11]), get(req[12]));
    try {
      scene.push_back(core::Splat2D(center, q, scales, opacity,
                                    core::ShCoeffs(degree, std::move(coeffs))));
    } catch (const InvalidInput &e) {
      throw SchemaError(where + "record " + std::to_string(i) + ": " + e.what());
    }
  }
  return scene;
}

void write_splat_ply(const core::SplatScene &scene, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  const int per_channel = scene.sh_stride() - 1;
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 3 * per_channel; ++i)
    names.push_back("f_rest_" + std::to_string(i));
  for (const char *n : {"opacity", "scale_0", "scale_1", "rot_0", "rot_1", "rot_2", "rot_3"})
    names.emplace_back(n);

  out << "ply\nformat binary_little_endian 1.0\n";
  out << "comment crs: " << scene.crs_note << "\n";
  out << "element vertex " << scene.size() << "\n";
  for (const auto &n : names)
    out << "property float " << n << "\n";
  out << "end_header\n";

  // Keeps the opacity logit finite for alpha in {0, 1}.
  constexpr double kOpacityEps = 1e-7;
  std::vector<float> record;
  record.reserve(names.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    record.clear();
    const auto &c = scene.centers()[i];
    record.insert(record.end(), {float(c.x()), float(c.y()), float(c.z())});
    const Eigen::Vector3d normal = core::rotation_matrix(scene.rotations()[i]).col(2);
    record.insert(record.end(), {float(normal.x()), float(normal.y()), float(normal.z())});
    const auto sh = scene.sh_of(i);
    for (int ch = 0; ch < 3; ++ch)
      record.push_back(static_cast<float>(sh[0][ch]));
    for (int ch = 0; ch < 3; ++ch)
      for (int k = 0; k < per_channel; ++k)
        record.push_back(static_cast<float>(sh[k + 1][ch]));
    const double alpha = std::clamp(scene.opacities()[i], kOpacityEps, 1.0 - kOpacityEps);
    record.push_back(static_cast<float>(logit(alpha)));
    record.push_back(static_cast<float>(std::log(scene.scales()[i].x())));
    record.push_back(static_cast<float>(std::log(scene.scales()[i].y())));
    const auto &q = scene.rotations()[i];
    record.insert(record.end(), {float(q.w()), float(q.x()), float(q.y()), float(q.z())});
    out.write(reinterpret_cast<const char *>(record.data()),
              static_cast<std::streamsize>(record.size() * sizeof(float)));
  }
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

} // namespace orthosplat::io
