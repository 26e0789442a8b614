#include "pfsplat/ply.hpp"

#include "pfsplat/errors.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace pfsplat {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

constexpr std::array<const char*, 14> kProperties = {
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
    "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};

double logit(double p) { return std::log(p) - std::log1p(-p); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void export_ply(const GlobalScene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("export_ply: cannot open " + path.string() + " for writing");
  }
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << scene.gaussians.size() << "\n";
  for (const char* name : kProperties) {
    out << "property float " << name << "\n";
  }
  out << "end_header\n";

  std::vector<float> row(kProperties.size());
  for (const auto& g : scene.gaussians) {
    const Eigen::Quaterniond q = g.rotation.normalized();
    const std::array<double, 14> values = {
        g.mean.x(), g.mean.y(), g.mean.z(),
        (g.color.x() - 0.5) / kShC0, (g.color.y() - 0.5) / kShC0, (g.color.z() - 0.5) / kShC0,
        logit(g.opacity),
        g.log_scale.x(), g.log_scale.y(), g.log_scale.z(),
        q.w(), q.x(), q.y(), q.z()};
    for (size_t i = 0; i < values.size(); ++i) {
      row[i] = static_cast<float>(values[i]);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) {
    throw IoError("export_ply: write failed for " + path.string());
  }
}

GlobalScene import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("import_ply: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw PlyHeaderError("import_ply: missing 'ply' magic");
  }
  bool have_format = false;
  bool in_vertex = false;
  long long count = -1;
  std::vector<std::string> props;
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header") {
      ended = true;
      break;
    }
    if (key == "comment" || key == "obj_info" || key.empty()) continue;
    if (key == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt != "binary_little_endian") {
        throw PlyHeaderError("import_ply: unsupported format '" + fmt + "'");
      }
      have_format = true;
    } else if (key == "element") {
      std::string name;
      long long n = -1;
      ls >> name >> n;
      if (name != "vertex" || count >= 0 || !ls || n < 0) {
        throw PlyHeaderError("import_ply: expected a single 'element vertex <count>'");
      }
      count = n;
      in_vertex = true;
    } else if (key == "property") {
      if (!in_vertex) {
        throw PlyHeaderError("import_ply: property before element");
      }
      std::string type, name;
      ls >> type >> name;
      if (type == "list") {
        throw PlyPropertyError("import_ply: list properties are not supported");
      }
      if (type != "float" && type != "float32") {
        throw PlyPropertyError("import_ply: property '" + name + "' has unsupported type '" + type + "'");
      }
      bool known = false;
      for (const char* p : kProperties) known = known || name == p;
      if (!known) {
        throw PlyPropertyError("import_ply: unknown property '" + name + "'");
      }
      for (const auto& seen : props) {
        if (seen == name) throw PlyHeaderError("import_ply: duplicate property '" + name + "'");
      }
      props.push_back(name);
    } else {
      throw PlyHeaderError("import_ply: unexpected header line '" + line + "'");
    }
  }
  if (!ended || !have_format || count < 0) {
    throw PlyHeaderError("import_ply: incomplete header");
  }
  if (props.size() != kProperties.size()) {
    throw PlyHeaderError("import_ply: expected 14 properties, found " + std::to_string(props.size()));
  }
  std::map<std::string, size_t> offset;
  for (size_t i = 0; i < props.size(); ++i) offset[props[i]] = i;

  const size_t stride = props.size();
  std::vector<float> data(static_cast<size_t>(count) * stride);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != data.size() * sizeof(float)) {
    throw PlyTruncatedError("import_ply: payload shorter than " + std::to_string(count) + " vertices");
  }

  GlobalScene scene;
  scene.gaussians.reserve(static_cast<size_t>(count));
  for (long long i = 0; i < count; ++i) {
    const float* row = data.data() + static_cast<size_t>(i) * stride;
    auto at = [&](const char* name) { return static_cast<double>(row[offset.at(name)]); };
    Gaussian g;
    g.mean = {at("x"), at("y"), at("z")};
    g.color = Vec3(at("f_dc_0"), at("f_dc_1"), at("f_dc_2")) * kShC0 + Vec3::Constant(0.5);
    g.opacity = sigmoid(at("opacity"));
    g.log_scale = {at("scale_0"), at("scale_1"), at("scale_2")};
    g.rotation = Eigen::Quaterniond(at("rot_0"), at("rot_1"), at("rot_2"), at("rot_3")).normalized();
    scene.gaussians.push_back(g);
    scene.provenance.push_back(0);
  }
  return scene;
}

}  // namespace pfsplat
