#include "orthosplat/colmap.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "orthosplat/core.hpp"
#include "orthosplat/error.hpp"

namespace orthosplat {

void SparseModel::validate() const {
  std::set<int> ids;
  for (const auto &c : cameras)
    ids.insert(c.id);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int id : points[i].track)
      if (!ids.count(id))
        throw SchemaError("point " + std::to_string(i) + " references unknown camera " +
                          std::to_string(id));
}

} // namespace orthosplat

namespace orthosplat::io {

namespace {

const Eigen::Matrix3d kFlipY = Eigen::Vector3d(1.0, -1.0, 1.0).asDiagonal();

struct Intrinsics {
  std::string model;
  int width = 0, height = 0;
  Eigen::Vector4d pinhole = Eigen::Vector4d::Zero();
};

std::ifstream open(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  return in;
}

bool is_comment_or_blank(const std::string &line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

[[noreturn]] void malformed(const std::filesystem::path &path, int line_no,
                            const std::string &what) {
  throw SchemaError("'" + path.string() + "' line " + std::to_string(line_no) + ": " + what);
}

} // namespace

projection::Pose pose_from_colmap(const Eigen::Quaterniond &q, const Eigen::Vector3d &t) {
  projection::Pose pose;
  pose.linear = kFlipY * core::rotation_matrix(q);
  pose.translation = kFlipY * t;
  return pose;
}

projection::Pose colmap_world_to_camera(const CameraRecord &record) {
  projection::Pose pose;
  pose.linear = kFlipY * record.pose().linear;
  pose.translation = kFlipY * record.pose().translation;
  return pose;
}

SparseModel read_colmap_sparse(const std::filesystem::path &dir) {
  std::map<int, Intrinsics> intrinsics;
  {
    const auto path = dir / "cameras.txt";
    auto in = open(path);
    std::string line;
    for (int line_no = 1; std::getline(in, line); ++line_no) {
      if (is_comment_or_blank(line))
        continue;
      std::istringstream ls(line);
      int id = 0;
      Intrinsics k;
      if (!(ls >> id >> k.model >> k.width >> k.height))
        malformed(path, line_no, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS");
      std::vector<double> params;
      for (double v; ls >> v;)
        params.push_back(v);
      if (k.model == "SIMPLE_PINHOLE") {
        if (params.size() != 3)
          malformed(path, line_no, "SIMPLE_PINHOLE needs 3 parameters");
        k.pinhole = {params[0], params[0], params[1], params[2]};
      } else if (k.model == "PINHOLE") {
        if (params.size() != 4)
          malformed(path, line_no, "PINHOLE needs 4 parameters");
        k.pinhole = {params[0], params[1], params[2], params[3]};
      } else {
        throw SchemaError("'" + path.string() + "' line " + std::to_string(line_no) +
                          ": unsupported camera model " + k.model);
      }
      if (k.width < 1 || k.height < 1 || !(k.pinhole[0] > 0.0 && k.pinhole[1] > 0.0))
        malformed(path, line_no, "non-positive image size or focal length");
      intrinsics[id] = k;
    }
  }

  SparseModel model;
  {
    const auto path = dir / "images.txt";
    auto in = open(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_comment_or_blank(line))
        continue;
      std::istringstream ls(line);
      CameraRecord rec;
      double qw, qx, qy, qz, tx, ty, tz;
      int camera_id = 0;
      if (!(ls >> rec.id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >>
            rec.image_path))
        malformed(path, line_no, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
      auto it = intrinsics.find(camera_id);
      if (it == intrinsics.end())
        malformed(path, line_no, "unknown CAMERA_ID " + std::to_string(camera_id));
      const Intrinsics &k = it->second;
      const Eigen::Quaterniond q(qw, qx, qy, qz);
      if (!(q.norm() > 0.0))
        malformed(path, line_no, "zero quaternion");
      rec.camera.pose = pose_from_colmap(q, {tx, ty, tz});
      rec.camera.width = k.width;
      rec.camera.height = k.height;
      rec.camera.fov_x = 2.0 * std::atan(0.5 * k.width / k.pinhole[0]);
      rec.camera.fov_y = 2.0 * std::atan(0.5 * k.height / k.pinhole[1]);
      rec.intrinsics_id = camera_id;
      rec.camera_model = k.model;
      rec.pinhole = k.pinhole;
      model.cameras.push_back(std::move(rec));
      // The 2D observation line follows, possibly empty.
      std::getline(in, line);
      ++line_no;
    }
  }

  {
    const auto path = dir / "points3D.txt";
    auto in = open(path);
    std::string line;
    for (int line_no = 1; std::getline(in, line); ++line_no) {
      if (is_comment_or_blank(line))
        continue;
      std::istringstream ls(line);
      long long id = 0;
      SparsePoint p;
      int r = 0, g = 0, b = 0;
      double error = 0.0;
      if (!(ls >> id >> p.xyz.x() >> p.xyz.y() >> p.xyz.z() >> r >> g >> b >> error))
        malformed(path, line_no, "expected POINT3D_ID X Y Z R G B ERROR TRACK[]");
      if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255)
        malformed(path, line_no, "color component out of range");
      p.rgb = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
               static_cast<std::uint8_t>(b)};
      std::set<int> seen;
      for (int image_id, point2d; ls >> image_id;) {
        if (!(ls >> point2d))
          malformed(path, line_no, "track entry without POINT2D_IDX");
        if (seen.insert(image_id).second)
          p.track.push_back(image_id);
      }
      model.points.push_back(std::move(p));
    }
  }
  model.validate();
  return model;
}

void write_colmap_sparse(const SparseModel &model, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  auto open_out = [&](const char *name) {
    std::ofstream out(dir / name);
    if (!out)
      throw IoError("cannot open '" + (dir / name).string() + "' for writing");
    out << std::setprecision(17);
    return out;
  };
  {
    auto out = open_out("cameras.txt");
    out << "# Camera list with one line of data per camera:\n"
        << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    std::set<int> written;
    for (const auto &c : model.cameras) {
      if (!written.insert(c.intrinsics_id).second)
        continue;
      Eigen::Vector4d k = c.pinhole;
      if (!(k[0] > 0.0)) {
        k = {0.5 * c.camera.width / std::tan(0.5 * c.camera.fov_x),
             0.5 * c.camera.height / std::tan(0.5 * c.camera.fov_y), 0.5 * c.camera.width,
             0.5 * c.camera.height};
      }
      out << c.intrinsics_id << ' ' << c.camera_model << ' ' << c.camera.width << ' '
          << c.camera.height;
      if (c.camera_model == "SIMPLE_PINHOLE")
        out << ' ' << k[0] << ' ' << k[2] << ' ' << k[3] << '\n';
      else
        out << ' ' << k[0] << ' ' << k[1] << ' ' << k[2] << ' ' << k[3] << '\n';
    }
  }
  {
    auto out = open_out("images.txt");
    out << "# Image list with two lines of data per image:\n"
        << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
        << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const auto &c : model.cameras) {
      const auto cv = colmap_world_to_camera(c);
      const auto q = core::quaternion_from_matrix(cv.linear);
      out << c.id << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' '
          << cv.translation.x() << ' ' << cv.translation.y() << ' ' << cv.translation.z() << ' '
          << c.intrinsics_id << ' ' << c.image_path << "\n\n";
    }
  }
  {
    auto out = open_out("points3D.txt");
    out << "# 3D point list with one line of data per point:\n"
        << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (std::size_t i = 0; i < model.points.size(); ++i) {
      const auto &p = model.points[i];
      out << i + 1 << ' ' << p.xyz.x() << ' ' << p.xyz.y() << ' ' << p.xyz.z() << ' '
          << int(p.rgb[0]) << ' ' << int(p.rgb[1]) << ' ' << int(p.rgb[2]) << " 0";
      for (int id : p.track)
        out << ' ' << id << " 0";
      out << '\n';
    }
  }
}

} // namespace orthosplat::io
