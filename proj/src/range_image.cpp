#include "pointvox/range_image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <thread>

#include "csv_util.hpp"

namespace pointvox {

// ---------------------------------------------------------------------------
// AugmentationRecord

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_step(const AugmentationStep& step) {
  std::visit(Overloaded{
                 [](const GlobalRotation& r) {
                   if (!std::isfinite(r.angle)) throw Error(ErrorCode::InvalidArgument, "rotation angle must be finite");
                 },
                 [](const FlipAxis& f) {
                   if (f.axis != 0 && f.axis != 1) throw Error(ErrorCode::InvalidArgument, "flip axis must be 0 or 1");
                 },
                 [](const GlobalScale& s) {
                   if (!(std::isfinite(s.factor) && s.factor > 0.0)) {
                     throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
                   }
                 },
                 [](const CopyPaste& c) {
                   if (c.end < c.begin) throw Error(ErrorCode::InvalidArgument, "copy-paste range is reversed");
                 },
             },
             step);
}

Vec3 rotate_z(const Vec3& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z()};
}

Vec3 forward_step(const AugmentationStep& step, Vec3 p) {
  return std::visit(Overloaded{
                        [&](const GlobalRotation& r) { return rotate_z(p, r.angle); },
                        [&](const FlipAxis& f) {
                          p[f.axis] = -p[f.axis];
                          return p;
                        },
                        [&](const GlobalScale& s) -> Vec3 { return p * s.factor; },
                        [&](const CopyPaste&) { return p; },
                    },
                    step);
}

Vec3 inverse_step(const AugmentationStep& step, Vec3 p) {
  return std::visit(Overloaded{
                        [&](const GlobalRotation& r) { return rotate_z(p, -r.angle); },
                        [&](const FlipAxis& f) {
                          p[f.axis] = -p[f.axis];
                          return p;
                        },
                        [&](const GlobalScale& s) -> Vec3 { return p / s.factor; },
                        [&](const CopyPaste&) { return p; },
                    },
                    step);
}

}  // namespace

AugmentationRecord::AugmentationRecord(std::vector<AugmentationStep> steps) : steps_(std::move(steps)) {
  for (const auto& s : steps_) validate_step(s);
}

void AugmentationRecord::push(AugmentationStep step) {
  validate_step(step);
  steps_.push_back(step);
}

Vec3 AugmentationRecord::apply(const Vec3& p) const {
  Vec3 out = p;
  for (const auto& s : steps_) out = forward_step(s, out);
  return out;
}

PointCloud AugmentationRecord::apply(const PointCloud& pc) const {
  std::vector<Vec3> out;
  out.reserve(pc.size());
  for (const auto& p : pc.positions()) out.push_back(apply(p));
  return PointCloud(std::move(out), pc.features());
}

BoundingBox3D AugmentationRecord::apply(const BoundingBox3D& box) const {
  Vec3 center = box.center();
  Vec3 size = box.size();
  double yaw = box.yaw();
  for (const auto& step : steps_) {
    center = forward_step(step, center);
    std::visit(Overloaded{
                   [&](const GlobalRotation& r) { yaw += r.angle; },
                   [&](const FlipAxis& f) { yaw = f.axis == 1 ? -yaw : std::numbers::pi - yaw; },
                   [&](const GlobalScale& s) { size *= s.factor; },
                   [&](const CopyPaste&) {},
               },
               step);
  }
  return BoundingBox3D(center, size, yaw);
}

Vec3 AugmentationRecord::invert(const Vec3& p) const {
  Vec3 out = p;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) out = inverse_step(*it, out);
  return out;
}

PointCloud inverse_augment(const PointCloud& points, const AugmentationRecord& rec) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points.positions()) out.push_back(rec.invert(p));
  return PointCloud(std::move(out), points.features());
}

std::vector<Vec3> inverse_augment(std::span<const Vec3> points, const AugmentationRecord& rec) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(rec.invert(p));
  return out;
}

void write_augmentation(std::ostream& out, const AugmentationRecord& rec) {
  out << std::setprecision(17);
  for (const auto& step : rec.steps()) {
    std::visit(Overloaded{
                   [&](const GlobalRotation& r) { out << "rotate " << r.angle << '\n'; },
                   [&](const FlipAxis& f) { out << "flip " << f.axis << '\n'; },
                   [&](const GlobalScale& s) { out << "scale " << s.factor << '\n'; },
                   [&](const CopyPaste& c) { out << "paste " << c.begin << ' ' << c.end << '\n'; },
               },
               step);
  }
}

AugmentationRecord read_augmentation(std::istream& in) {
  AugmentationRecord rec;
  std::string line;
  while (std::getline(in, line)) {
    const auto parts = detail::split_csv(detail::trim(line), ' ');
    if (parts.empty() || parts[0].empty() || parts[0][0] == '#') continue;
    const auto& op = parts[0];
    const auto need = [&](std::size_t n) {
      if (parts.size() != n + 1) throw Error(ErrorCode::Io, "augmentation: bad arity for '" + op + "'");
    };
    if (op == "rotate") {
      need(1);
      rec.push(GlobalRotation{detail::parse_double(parts[1])});
    } else if (op == "flip") {
      need(1);
      rec.push(FlipAxis{static_cast<int>(detail::parse_int(parts[1]))});
    } else if (op == "scale") {
      need(1);
      rec.push(GlobalScale{detail::parse_double(parts[1])});
    } else if (op == "paste") {
      need(2);
      rec.push(CopyPaste{static_cast<std::size_t>(detail::parse_int(parts[1])),
                         static_cast<std::size_t>(detail::parse_int(parts[2]))});
    } else {
      throw Error(ErrorCode::Io, "augmentation: unknown step '" + op + "'");
    }
  }
  return rec;
}

AugmentationRecord read_augmentation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open augmentation record: " + path.string());
  return read_augmentation(in);
}

// ---------------------------------------------------------------------------
// VirtualRangeImage

void RangeImageSpec::validate() const {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidArgument, "range image needs rows, cols >= 1");
  if (!(inclination_min < inclination_max)) throw Error(ErrorCode::InvalidArgument, "inclination bounds reversed");
}

long long VirtualRangeImage::unwrapped_col(double azimuth) const {
  return static_cast<long long>(std::floor((azimuth + std::numbers::pi) / (2.0 * std::numbers::pi) * spec_.cols));
}

int VirtualRangeImage::row_of(double inclination) const {
  const double t = (spec_.inclination_max - inclination) / (spec_.inclination_max - spec_.inclination_min);
  const double r = std::floor(t * spec_.rows);
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(spec_.rows - 1)));
}

PixelCoord VirtualRangeImage::pixel_of(const SphericalCoordinate& s) const {
  long long c = unwrapped_col(s.azimuth) % spec_.cols;
  if (c < 0) c += spec_.cols;
  return {row_of(s.inclination), static_cast<int>(c)};
}

VirtualRangeImage VirtualRangeImage::build(const PointCloud& points, const RigidTransform& to_sensor,
                                           const RangeImageSpec& spec) {
  spec.validate();
  if (points.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidArgument, "range image supports fewer than 2^32 points");
  }
  VirtualRangeImage img;
  img.spec_ = spec;
  img.to_sensor_ = to_sensor;

  const std::size_t n = points.size();
  const std::size_t pixels = static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols);
  std::vector<SphericalCoordinate> sph(n);
  std::vector<std::uint32_t> pid(n);
  img.offsets_.assign(pixels + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sph[i] = cartesian_to_spherical(to_sensor.apply(points.position(i)));
    const PixelCoord px = img.pixel_of(sph[i]);
    pid[i] = static_cast<std::uint32_t>(img.pixel_id(px.row, px.col));
    ++img.offsets_[pid[i] + 1];
  }
  for (std::size_t p = 0; p < pixels; ++p) img.offsets_[p + 1] += img.offsets_[p];

  // Counting sort; scanning points in index order keeps each pixel stable.
  std::vector<std::uint32_t> cursor(img.offsets_.begin(), img.offsets_.end() - 1);
  img.positions_.resize(n);
  img.spherical_.resize(n);
  img.original_index_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t slot = cursor[pid[i]]++;
    img.positions_[slot] = points.position(i);
    img.spherical_[slot] = sph[i];
    img.original_index_[slot] = static_cast<std::uint32_t>(i);
  }
  return img;
}

void VirtualRangeImage::write_debug_csv(std::ostream& out) const {
  out << "row,col,start,end\n";
  for (int r = 0; r < spec_.rows; ++r) {
    for (int c = 0; c < spec_.cols; ++c) {
      if (start(r, c) == end(r, c)) continue;
      out << r << ',' << c << ',' << start(r, c) << ',' << end(r, c) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Ball query

void BallQueryRequest::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorCode::InvalidArgument, "ball radius must be > 0");
  if (max_neighbors < 1) throw Error(ErrorCode::InvalidArgument, "ball query needs k >= 1");
  if (kernel < 1) throw Error(ErrorCode::InvalidArgument, "kernel size must be >= 1");
}

BallQueryCounters& BallQueryCounters::operator+=(const BallQueryCounters& o) {
  queries += o.queries;
  pixels_visited += o.pixels_visited;
  candidates_inspected += o.candidates_inspected;
  kept += o.kept;
  return *this;
}

namespace {

struct WindowBounds {
  int lo;
  int hi;
};

// A window of side s spans offsets [-(s/2), s - 1 - s/2] around the center pixel.
WindowBounds window_bounds(int kernel) {
  const int lo = -(kernel / 2);
  return {lo, lo + kernel - 1};
}

// Draws min(k, |kept|) of the kept indices and writes them to out in ascending order.
std::size_t select(std::vector<std::int64_t>& kept, const BallQueryRequest& req, std::size_t query,
                   std::int64_t* out) {
  const std::size_t k = req.max_neighbors;
  if (req.mode == SelectionMode::Sequential || kept.size() <= k) {
    const std::size_t take = std::min(k, kept.size());
    std::copy_n(kept.begin(), take, out);
    return take;
  }
  std::sort(kept.begin(), kept.end());
  SeededRng rng = SeededRng(req.seed).fork(query);
  auto picks = rng.sample_without_replacement(kept.size(), k);
  std::sort(picks.begin(), picks.end());
  for (std::size_t j = 0; j < k; ++j) out[j] = kept[picks[j]];
  return k;
}

BallQueryResult make_result(std::size_t m, std::size_t k) {
  BallQueryResult res;
  res.max_neighbors = k;
  res.indices.assign(m * k, -1);
  res.counts.assign(m, 0);
  return res;
}

}  // namespace

BallQueryResult ball_query(const VirtualRangeImage& img, std::span<const Vec3> queries, const BallQueryRequest& req,
                           BallQueryCounters* counters, unsigned workers) {
  req.validate();
  const auto& spec = img.spec();
  const std::size_t m = queries.size();
  const std::size_t k = req.max_neighbors;
  BallQueryResult res = make_result(m, k);
  const WindowBounds wb = window_bounds(req.kernel);
  const double r2 = req.radius * req.radius;
  const bool all_cols = req.kernel >= spec.cols;
  const auto& pos = img.sorted_positions();
  const auto& orig = img.original_index();

  auto run_range = [&](std::size_t q_begin, std::size_t q_end, BallQueryCounters& local) {
    std::vector<std::int64_t> kept;
    for (std::size_t q = q_begin; q < q_end; ++q) {
      const Vec3& query = queries[q];
      const SphericalCoordinate s = cartesian_to_spherical(img.to_sensor().apply(query));
      const PixelCoord center = img.pixel_of(s);
      kept.clear();
      ++local.queries;
      const int col_start = all_cols ? (((center.col + wb.lo) % spec.cols) + spec.cols) % spec.cols : center.col + wb.lo;
      const int col_count = all_cols ? spec.cols : req.kernel;
      bool full = false;
      for (int dr = wb.lo; dr <= wb.hi && !full; ++dr) {
        const int row = center.row + dr;
        if (row < 0 || row >= spec.rows) continue;
        for (int j = 0; j < col_count && !full; ++j) {
          int col = (col_start + j) % spec.cols;
          if (col < 0) col += spec.cols;
          ++local.pixels_visited;
          const std::uint32_t b = img.start(row, col);
          const std::uint32_t e = img.end(row, col);
          for (std::uint32_t i = b; i < e; ++i) {
            ++local.candidates_inspected;
            if ((pos[i] - query).squaredNorm() < r2) {
              kept.push_back(orig[i]);
              if (req.mode == SelectionMode::Sequential && kept.size() == k) {
                full = true;
                break;
              }
            }
          }
        }
      }
      local.kept += kept.size();
      res.counts[q] = static_cast<std::uint32_t>(select(kept, req, q, res.indices.data() + q * k));
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(m, 1))));
  std::vector<BallQueryCounters> partial(workers);
  if (workers == 1) {
    run_range(0, m, partial[0]);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (m + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = std::min(m, w * chunk);
      const std::size_t e = std::min(m, b + chunk);
      pool.emplace_back([&, b, e, w] { run_range(b, e, partial[w]); });
    }
  }
  if (counters) {
    for (const auto& p : partial) *counters += p;
  }
  return res;
}

BallQueryResult brute_force_ball_query(const PointCloud& pc, std::span<const Vec3> queries, const BallQueryRequest& req,
                                       BallQueryCounters* counters) {
  req.validate();
  const std::size_t m = queries.size();
  const std::size_t k = req.max_neighbors;
  BallQueryResult res = make_result(m, k);
  const double r2 = req.radius * req.radius;
  const auto& pos = pc.positions();
  BallQueryCounters local;
  std::vector<std::int64_t> kept;
  for (std::size_t q = 0; q < m; ++q) {
    kept.clear();
    ++local.queries;
    const Vec3& query = queries[q];
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if ((pos[i] - query).squaredNorm() < r2) {
        kept.push_back(static_cast<std::int64_t>(i));
        if (req.mode == SelectionMode::Sequential && kept.size() == k) break;
      }
    }
    local.candidates_inspected += pos.size();
    local.kept += kept.size();
    res.counts[q] = static_cast<std::uint32_t>(select(kept, req, q, res.indices.data() + q * k));
  }
  if (counters) *counters += local;
  return res;
}

bool window_covers_ball(const VirtualRangeImage& img, const Vec3& query, double radius, int kernel) {
  constexpr double kMargin = 1e-9;
  const auto& spec = img.spec();
  const Vec3 local = img.to_sensor().apply(query);
  const double range = local.norm();
  const double horizontal = std::hypot(local.x(), local.y());
  if (!(horizontal > radius * (1.0 + kMargin) + kMargin)) return false;
  const SphericalCoordinate s = cartesian_to_spherical(local);
  const double half_incl = std::asin(std::min(1.0, radius / range)) + kMargin;
  const double half_azim = std::asin(std::min(1.0, radius / horizontal)) + kMargin;
  const WindowBounds wb = window_bounds(kernel);

  const int center_row = img.row_of(s.inclination);
  const int row_top = img.row_of(s.inclination + half_incl);
  const int row_bottom = img.row_of(s.inclination - half_incl);
  const int win_top = std::max(0, center_row + wb.lo);
  const int win_bottom = std::min(spec.rows - 1, center_row + wb.hi);
  if (row_top < win_top || row_bottom > win_bottom) return false;

  if (kernel >= spec.cols) return true;
  const long long center_col = img.unwrapped_col(s.azimuth);
  const long long col_lo = img.unwrapped_col(s.azimuth - half_azim);
  const long long col_hi = img.unwrapped_col(s.azimuth + half_azim);
  return col_lo >= center_col + wb.lo && col_hi <= center_col + wb.hi;
}

}  // namespace pointvox
