#include "pointvox/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "csv_util.hpp"

namespace pointvox::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) throw Error(ErrorCode::Io, "PCB: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::Io, "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::Io, "cannot open for reading: " + path.string());
  return in;
}

}  // namespace

void write_pcb(std::ostream& out, const PointCloud& pc) {
  if (pc.size() > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::Io, "PCB: too many points");
  out.write("PCB1", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pc.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pc.feature_dim()));
  for (const auto& p : pc.positions()) {
    for (int a = 0; a < 3; ++a) put_le<float>(out, static_cast<float>(p[a]));
  }
  const auto& f = pc.features();
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) put_le<float>(out, static_cast<float>(f(r, c)));
  }
  if (!out) throw Error(ErrorCode::Io, "PCB: write failed");
}

void write_pcb(const std::filesystem::path& path, const PointCloud& pc) {
  auto out = open_out(path, true);
  write_pcb(out, pc);
}

PointCloud read_pcb(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "PCB1", 4) != 0) {
    throw Error(ErrorCode::Io, "PCB: bad magic");
  }
  const auto n = get_le<std::uint32_t>(in);
  const auto d = get_le<std::uint32_t>(in);
  std::vector<Vec3> positions(n);
  for (auto& p : positions) {
    for (int a = 0; a < 3; ++a) p[a] = get_le<float>(in);
  }
  FeatureMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) features(r, c) = get_le<float>(in);
  }
  return PointCloud(std::move(positions), std::move(features));
}

PointCloud read_pcb(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  return read_pcb(in);
}

PointCloud read_point_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "CSV: missing header");
  const auto header = detail::split_csv(line);
  if (header.size() < 3 || header[0] != "x" || header[1] != "y" || header[2] != "z") {
    throw Error(ErrorCode::Io, "CSV: header must start with x,y,z");
  }
  const std::size_t d = header.size() - 3;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[3 + j] != "f" + std::to_string(j)) throw Error(ErrorCode::Io, "CSV: feature columns must be f0,f1,...");
  }
  std::vector<Vec3> positions;
  std::vector<double> feats;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) throw Error(ErrorCode::Io, "CSV: wrong column count on line " + std::to_string(line_no));
    positions.emplace_back(detail::parse_double(cells[0]), detail::parse_double(cells[1]), detail::parse_double(cells[2]));
    for (std::size_t j = 0; j < d; ++j) feats.push_back(detail::parse_double(cells[3 + j]));
  }
  FeatureMatrix features(static_cast<Eigen::Index>(positions.size()), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) features(r, c) = feats[static_cast<std::size_t>(r * features.cols() + c)];
  }
  return PointCloud(std::move(positions), std::move(features));
}

PointCloud read_point_csv(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  return read_point_csv(in);
}

void write_point_csv(std::ostream& out, const PointCloud& pc) {
  out << "x,y,z";
  for (Eigen::Index j = 0; j < pc.feature_dim(); ++j) out << ",f" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.position(i);
    out << p.x() << ',' << p.y() << ',' << p.z();
    for (Eigen::Index j = 0; j < pc.feature_dim(); ++j) out << ',' << pc.features()(static_cast<Eigen::Index>(i), j);
    out << '\n';
  }
}

std::vector<BoundingBox3D> read_boxes_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "boxes CSV: missing header");
  if (detail::trim(line) != "cx,cy,cz,length,width,height,yaw") {
    throw Error(ErrorCode::Io, "boxes CSV: header must be cx,cy,cz,length,width,height,yaw");
  }
  std::vector<BoundingBox3D> boxes;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto c = detail::split_csv(line);
    if (c.size() != 7) throw Error(ErrorCode::Io, "boxes CSV: expected 7 columns");
    boxes.emplace_back(Vec3(detail::parse_double(c[0]), detail::parse_double(c[1]), detail::parse_double(c[2])),
                       Vec3(detail::parse_double(c[3]), detail::parse_double(c[4]), detail::parse_double(c[5])),
                       detail::parse_double(c[6]));
  }
  return boxes;
}

std::vector<BoundingBox3D> read_boxes_csv(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  return read_boxes_csv(in);
}

void write_boxes_csv(std::ostream& out, const std::vector<BoundingBox3D>& boxes) {
  out << "cx,cy,cz,length,width,height,yaw\n" << std::setprecision(17);
  for (const auto& b : boxes) {
    out << b.center().x() << ',' << b.center().y() << ',' << b.center().z() << ',' << b.size().x() << ','
        << b.size().y() << ',' << b.size().z() << ',' << b.yaw() << '\n';
  }
}

void write_boxes_csv(const std::filesystem::path& path, const std::vector<BoundingBox3D>& boxes) {
  auto out = open_out(path, false);
  write_boxes_csv(out, boxes);
}

}  // namespace pointvox::io
