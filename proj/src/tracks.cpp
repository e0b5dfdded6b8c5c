#include "artikin/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "artikin/errors.hpp"

namespace artikin {

namespace {

// Deterministic uniform in [0, 1) from the top 53 bits of the generator;
// keeps file-level reproducibility independent of libstdc++ distributions.
double canonical_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller pair; u1 is shifted into (0, 1] so the log stays finite.
void gaussian_pair(std::mt19937_64& rng, double& n1, double& n2) {
  const double u1 = 1.0 - canonical_uniform(rng);
  const double u2 = canonical_uniform(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  n1 = r * std::cos(2.0 * std::numbers::pi * u2);
  n2 = r * std::sin(2.0 * std::numbers::pi * u2);
}

Eigen::Vector3d gaussian_vector(std::mt19937_64& rng) {
  double a, b, c, d;
  gaussian_pair(rng, a, b);
  gaussian_pair(rng, c, d);
  (void)d;
  return {a, b, c};
}

double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

}  // namespace

TrackSet TrackSet::create(int n, int t) {
  TrackSet ts;
  ts.point_count = n;
  ts.frame_count = t;
  ts.positions.assign(static_cast<size_t>(n) * t, Eigen::Vector3d::Zero());
  ts.visibility.assign(static_cast<size_t>(n) * t, 1);
  ts.confidence.assign(static_cast<size_t>(n) * t, 1.0);
  return ts;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> TrackSet::bounding_box() const {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(
      std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (size_t s = 0; s < positions.size(); ++s) {
    if (!visibility[s] && !positions[s].allFinite()) continue;
    lo = lo.cwiseMin(positions[s]);
    hi = hi.cwiseMax(positions[s]);
  }
  return {lo, hi};
}

double TrackSet::bounding_box_diagonal() const {
  auto [lo, hi] = bounding_box();
  return (hi - lo).norm();
}

TrackSet TrackSet::subsample_frames(int stride) const {
  if (stride < 1) throw InvalidInputError("subsample_frames: stride < 1");
  const int kept = (frame_count + stride - 1) / stride;
  TrackSet out = TrackSet::create(point_count, kept);
  for (int i = 0; i < point_count; ++i) {
    for (int j = 0; j < kept; ++j) {
      const int t = j * stride;
      out.position(i, j) = position(i, t);
      out.visibility[out.index(i, j)] = visibility[index(i, t)];
      out.confidence[out.index(i, j)] = confidence[index(i, t)];
    }
  }
  return out;
}

void TrackSet::validate() const {
  if (point_count < 4)
    throw InvalidInputError("tracks: need at least 4 points");
  if (frame_count < 3)
    throw InvalidInputError("tracks: need at least 3 frames");
  const size_t total = static_cast<size_t>(point_count) * frame_count;
  if (positions.size() != total || visibility.size() != total ||
      confidence.size() != total)
    throw InvalidInputError("tracks: storage size mismatch");
  for (size_t s = 0; s < total; ++s) {
    if (confidence[s] < 0.0 || confidence[s] > 1.0 ||
        !std::isfinite(confidence[s]))
      throw InvalidInputError("tracks: confidence outside [0, 1]");
    if (visibility[s] && !positions[s].allFinite())
      throw InvalidInputError("tracks: non-finite visible position");
  }
}

TrackSet interpolate_occlusions(const TrackSet& tracks) {
  TrackSet out = tracks;
  const int t_count = tracks.frame_count;
  std::vector<int> visible_frames;
  for (int i = 0; i < tracks.point_count; ++i) {
    visible_frames.clear();
    for (int t = 0; t < t_count; ++t)
      if (tracks.visible(i, t)) visible_frames.push_back(t);
    if (visible_frames.size() < 2)
      throw DegenerateTrackError(
          "point " + std::to_string(i) + " visible in fewer than 2 frames", i);

    size_t next = 0;  // first visible frame >= t
    for (int t = 0; t < t_count; ++t) {
      if (tracks.visible(i, t)) continue;
      while (next < visible_frames.size() && visible_frames[next] < t) ++next;
      if (next == 0) {
        out.position(i, t) = tracks.position(i, visible_frames.front());
      } else if (next == visible_frames.size()) {
        out.position(i, t) = tracks.position(i, visible_frames.back());
      } else {
        const int a = visible_frames[next - 1];
        const int b = visible_frames[next];
        const double alpha = static_cast<double>(t - a) / (b - a);
        out.position(i, t) = (1.0 - alpha) * tracks.position(i, a) +
                             alpha * tracks.position(i, b);
      }
    }
  }
  return out;
}

int RigSpec::point_count() const {
  int n = 0;
  for (const auto& p : parts) n += static_cast<int>(p.canonical_points.size());
  return n;
}

void RigSpec::validate() const {
  if (frame_count < 3) throw InvalidInputError("rig: need at least 3 frames");
  if (parts.empty()) throw InvalidInputError("rig: no parts");
  if (parts[0].kind != JointKind::kStatic)
    throw InvalidInputError("rig: part 0 must be static");
  std::vector<std::pair<int, int>> windows;
  for (size_t k = 0; k < parts.size(); ++k) {
    const RigPart& p = parts[k];
    if (k > 0 && p.kind == JointKind::kStatic)
      throw InvalidInputError("rig: only part 0 may be static");
    if (static_cast<int>(p.schedule.size()) != frame_count)
      throw InvalidInputError("rig: schedule length != frame count (part " +
                              std::to_string(k) + ")");
    for (double q : p.schedule)
      if (!std::isfinite(q))
        throw InvalidInputError("rig: non-finite schedule value");
    if (p.canonical_points.empty())
      throw InvalidInputError("rig: part " + std::to_string(k) +
                              " has no points");
    if (p.kind != JointKind::kStatic) {
      if (p.window_begin < 0 || p.window_end >= frame_count ||
          p.window_begin >= p.window_end)
        throw InvalidInputError("rig: bad activation window (part " +
                                std::to_string(k) + ")");
      for (int t = 0; t < p.window_begin; ++t)
        if (p.schedule[t] != p.schedule[p.window_begin])
          throw InvalidInputError(
              "rig: schedule not constant before window (part " +
              std::to_string(k) + ")");
      for (int t = p.window_end + 1; t < frame_count; ++t)
        if (p.schedule[t] != p.schedule[p.window_end])
          throw InvalidInputError(
              "rig: schedule not constant after window (part " +
              std::to_string(k) + ")");
      windows.emplace_back(p.window_begin, p.window_end);
    }
  }
  std::sort(windows.begin(), windows.end());
  for (size_t w = 1; w < windows.size(); ++w)
    if (windows[w].first <= windows[w - 1].second)
      throw InvalidInputError("rig: overlapping activation windows");
  if (point_count() < 4)
    throw InvalidInputError("rig: need at least 4 points total");
}

void NoiseSpec::validate() const {
  if (!(position_sigma >= 0.0) || !std::isfinite(position_sigma))
    throw InvalidInputError("noise: bad position sigma");
  if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0))
    throw InvalidInputError("noise: occlusion rate outside [0, 1)");
  if (!(confidence_floor >= 0.0 && confidence_floor <= 1.0))
    throw InvalidInputError("noise: confidence floor outside [0, 1]");
}

std::pair<TrackSet, ArticulatedModel> synthesize(const RigSpec& rig,
                                                 const NoiseSpec& noise,
                                                 std::uint64_t seed) {
  rig.validate();
  noise.validate();

  const int t_count = rig.frame_count;
  const int n = rig.point_count();
  const int k_count = rig.part_count();

  // Ground truth with scalars rebased so frame 0 carries no articulation:
  // q'(t) = q(t) - q(0) with canonical points moved by T(q(0)). For both
  // joint models the rebased transform composes back to the original one.
  ArticulatedModel gt;
  gt.temperature = 1.0;
  gt.canonical_frame = 0;
  gt.parts.resize(k_count);
  gt.assignment_logits = Eigen::MatrixXd::Constant(n, k_count, -40.0);

  TrackSet tracks = TrackSet::create(n, t_count);
  std::mt19937_64 rng(seed);

  for (int k = 0; k < k_count; ++k) {
    const RigPart& rp = rig.parts[k];
    Joint& joint = gt.parts[k];
    joint.kind = rp.kind;
    joint.axis = rp.axis;
    joint.pivot = rp.pivot;
    joint.scalars.assign(t_count, 0.0);
    const double q0 = rp.schedule[0];
    if (rp.kind != JointKind::kStatic)
      for (int t = 0; t < t_count; ++t)
        joint.scalars[t] = rp.schedule[t] - q0;

    RigidTransform to_canonical = RigidTransform::identity();
    if (rp.kind == JointKind::kRevolute)
      to_canonical = revolute_transform(rp.axis, rp.pivot, q0);
    else if (rp.kind == JointKind::kPrismatic)
      to_canonical = prismatic_transform(rp.axis, q0);

    for (const auto& raw_point : rp.canonical_points) {
      const int i = static_cast<int>(gt.canonical_points.size());
      const Eigen::Vector3d canonical = to_canonical.apply(raw_point);
      gt.canonical_points.push_back(canonical);
      gt.assignment_logits(i, k) = 0.0;

      for (int t = 0; t < t_count; ++t) {
        const Eigen::Vector3d clean = joint.transform(t).apply(canonical);
        const Eigen::Vector3d jitter = gaussian_vector(rng);
        tracks.position(i, t) = clean + noise.position_sigma * jitter;
        const bool occluded = canonical_uniform(rng) < noise.occlusion_rate;
        tracks.visibility[tracks.index(i, t)] = occluded ? 0 : 1;
        tracks.confidence[tracks.index(i, t)] =
            noise.confidence_floor +
            (1.0 - noise.confidence_floor) * canonical_uniform(rng);
      }
    }
  }

  tracks.validate();
  gt.validate();
  return {std::move(tracks), std::move(gt)};
}

// ---------------------------------------------------------------------------
// Track file I/O
// ---------------------------------------------------------------------------

void save_tracks(const TrackSet& tracks, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open for writing: " + path);
  out << "ARTIKIN-TRACKS v1 N=" << tracks.point_count
      << " T=" << tracks.frame_count << "\n";
  char buf[256];
  for (int i = 0; i < tracks.point_count; ++i) {
    for (int t = 0; t < tracks.frame_count; ++t) {
      const Eigen::Vector3d& p = tracks.position(i, t);
      std::snprintf(buf, sizeof(buf), "%d %d %.17g %.17g %.17g %d %.17g\n", i,
                    t, p.x(), p.y(), p.z(), tracks.visible(i, t) ? 1 : 0,
                    tracks.conf(i, t));
      out << buf;
    }
  }
  if (!out) throw InvalidInputError("write failed: " + path);
}

TrackSet load_tracks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tracks file: " + path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty tracks file: " + path);
  ++line_no;

  int n = 0, t_count = 0;
  {
    std::istringstream hs(line);
    std::string magic, version, nfield, tfield;
    hs >> magic >> version >> nfield >> tfield;
    if (magic != "ARTIKIN-TRACKS" || version != "v1" ||
        nfield.rfind("N=", 0) != 0 || tfield.rfind("T=", 0) != 0)
      throw ParseError("bad tracks header in " + path, line_no);
    try {
      n = std::stoi(nfield.substr(2));
      t_count = std::stoi(tfield.substr(2));
    } catch (const std::exception&) {
      throw ParseError("bad tracks header in " + path, line_no);
    }
  }
  if (n < 4 || t_count < 3)
    throw ParseError("tracks header too small (N >= 4, T >= 3)", line_no);

  TrackSet tracks = TrackSet::create(n, t_count);
  long records = 0;
  const long expected = static_cast<long>(n) * t_count;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (records >= expected)
      throw ParseError("extra record past N*T in " + path, line_no);
    std::istringstream ls(line);
    int i, t, v;
    double x, y, z, c;
    if (!(ls >> i >> t >> x >> y >> z >> v >> c))
      throw ParseError("malformed record in " + path, line_no);
    std::string trailing;
    if (ls >> trailing)
      throw ParseError("trailing content after record in " + path, line_no);
    const long expected_i = records / t_count;
    const long expected_t = records % t_count;
    if (i != expected_i || t != expected_t)
      throw ParseError("records not sorted by (i, t) in " + path, line_no);
    if (v != 0 && v != 1)
      throw ParseError("visibility must be 0 or 1 in " + path, line_no);
    if (!(c >= 0.0 && c <= 1.0))
      throw ParseError("confidence outside [0, 1] in " + path, line_no);
    if (v == 1 && !(std::isfinite(x) && std::isfinite(y) && std::isfinite(z)))
      throw ParseError("non-finite visible position in " + path, line_no);
    tracks.position(i, t) = {x, y, z};
    tracks.visibility[tracks.index(i, t)] = static_cast<std::uint8_t>(v);
    tracks.confidence[tracks.index(i, t)] = c;
    ++records;
  }
  if (records != expected)
    throw ParseError("truncated tracks file: expected " +
                         std::to_string(expected) + " records, got " +
                         std::to_string(records) + " in " + path,
                     line_no);
  tracks.validate();
  return tracks;
}

// ---------------------------------------------------------------------------
// Rig file I/O
// ---------------------------------------------------------------------------

namespace {

double smoothstep01(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// "ramp v": 0 -> v across the window. "sweep a b": 0 -> a over the first 40%
// of the window, then a -> b over the rest. Both use smoothstep easing and
// hold their final value after the window.
std::vector<double> generate_schedule(const std::string& generator,
                                      const std::vector<double>& args,
                                      int frames, int begin, int end,
                                      long line_no) {
  std::vector<double> q(frames, 0.0);
  const double span = static_cast<double>(end - begin);
  if (generator == "ramp") {
    if (args.size() != 1) throw ParseError("schedule ramp needs 1 value", line_no);
    for (int t = 0; t < frames; ++t) {
      const double u = (t - begin) / span;
      q[t] = args[0] * smoothstep01(u);
    }
  } else if (generator == "sweep") {
    if (args.size() != 2) throw ParseError("schedule sweep needs 2 values", line_no);
    const int mid = begin + static_cast<int>(std::floor(0.4 * span));
    for (int t = 0; t < frames; ++t) {
      if (t <= mid) {
        const double u = (t - begin) / static_cast<double>(mid - begin);
        q[t] = args[0] * smoothstep01(u);
      } else {
        const double u = (t - mid) / static_cast<double>(end - mid);
        q[t] = args[0] + (args[1] - args[0]) * smoothstep01(u);
      }
    }
  } else {
    throw ParseError("unknown schedule generator: " + generator, line_no);
  }
  return q;
}

std::vector<double> parse_numbers(std::istringstream& ls) {
  std::vector<double> values;
  double v;
  while (ls >> v) values.push_back(v);
  if (!ls.eof()) throw ParseError("non-numeric value in list");
  return values;
}

}  // namespace

std::vector<Eigen::Vector3d> halton_box_cloud(const Eigen::Vector3d& center,
                                              const Eigen::Vector3d& extent,
                                              int count) {
  std::vector<Eigen::Vector3d> points;
  points.reserve(count);
  for (int j = 0; j < count; ++j) {
    const Eigen::Vector3d u(halton(j + 1, 2), halton(j + 1, 3),
                            halton(j + 1, 5));
    points.push_back(center + (2.0 * u - Eigen::Vector3d::Ones()).cwiseProduct(extent));
  }
  return points;
}

RigSpec load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open rig file: " + path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line.rfind("ARTIKIN-RIG v1", 0) != 0)
    throw ParseError("missing ARTIKIN-RIG v1 header in " + path, 1);
  ++line_no;

  RigSpec rig;
  int declared_parts = -1;
  int current = -1;  // part being filled
  struct PendingSchedule {
    std::string generator;
    std::vector<double> args;
    long line_no;
  };
  std::vector<PendingSchedule> pending(64);
  std::vector<bool> has_pending(64, false);

  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::string body = line.substr(first);
    while (!body.empty() && (body.back() == '\r' || body.back() == ' '))
      body.pop_back();

    if (body.front() == '[') {
      std::istringstream hs(body);
      std::string open, idx;
      hs >> open >> idx;
      if (open != "[part" || idx.empty() || idx.back() != ']')
        throw ParseError("bad section header: " + body, line_no);
      int k;
      try {
        k = std::stoi(idx.substr(0, idx.size() - 1));
      } catch (const std::exception&) {
        throw ParseError("bad part index: " + body, line_no);
      }
      if (k != static_cast<int>(rig.parts.size()))
        throw ParseError("part sections must be sequential", line_no);
      rig.parts.emplace_back();
      current = k;
      continue;
    }

    const size_t colon = body.find(':');
    if (colon == std::string::npos)
      throw ParseError("expected 'key: value' line: " + body, line_no);
    const std::string key = body.substr(0, colon);
    std::istringstream ls(body.substr(colon + 1));

    if (key == "frames") {
      if (!(ls >> rig.frame_count))
        throw ParseError("bad frames value", line_no);
    } else if (key == "parts") {
      if (!(ls >> declared_parts))
        throw ParseError("bad parts value", line_no);
    } else if (current < 0) {
      throw ParseError("key '" + key + "' outside a [part] section", line_no);
    } else if (key == "kind") {
      std::string kind;
      ls >> kind;
      try {
        rig.parts[current].kind = joint_kind_from_string(kind);
      } catch (const InvalidInputError& e) {
        throw ParseError(e.what(), line_no);
      }
    } else if (key == "axis") {
      const auto v = parse_numbers(ls);
      if (v.size() != 3) throw ParseError("axis needs 3 values", line_no);
      rig.parts[current].axis = UnitAxis({v[0], v[1], v[2]});
    } else if (key == "pivot") {
      const auto v = parse_numbers(ls);
      if (v.size() != 3) throw ParseError("pivot needs 3 values", line_no);
      rig.parts[current].pivot = {v[0], v[1], v[2]};
    } else if (key == "window") {
      const auto v = parse_numbers(ls);
      if (v.size() != 2) throw ParseError("window needs 2 values", line_no);
      rig.parts[current].window_begin = static_cast<int>(v[0]);
      rig.parts[current].window_end = static_cast<int>(v[1]);
    } else if (key == "schedule") {
      PendingSchedule p;
      if (!(ls >> p.generator))
        throw ParseError("schedule needs a generator name", line_no);
      p.args = parse_numbers(ls);
      p.line_no = line_no;
      if (current >= static_cast<int>(pending.size())) {
        pending.resize(current + 1);
        has_pending.resize(current + 1, false);
      }
      pending[current] = std::move(p);
      has_pending[current] = true;
    } else if (key == "schedule_values") {
      try {
        rig.parts[current].schedule = parse_numbers(ls);
      } catch (ParseError&) {
        throw ParseError("bad schedule_values", line_no);
      }
    } else if (key == "point") {
      const auto v = parse_numbers(ls);
      if (v.size() != 3) throw ParseError("point needs 3 values", line_no);
      rig.parts[current].canonical_points.push_back({v[0], v[1], v[2]});
    } else if (key == "box") {
      const auto v = parse_numbers(ls);
      if (v.size() != 7) throw ParseError(
          "box needs 7 values: cx cy cz ex ey ez count", line_no);
      const auto cloud = halton_box_cloud({v[0], v[1], v[2]},
                                          {v[3], v[4], v[5]},
                                          static_cast<int>(v[6]));
      auto& pts = rig.parts[current].canonical_points;
      pts.insert(pts.end(), cloud.begin(), cloud.end());
    } else {
      throw ParseError("unknown key '" + key + "' in " + path, line_no);
    }
  }

  if (declared_parts >= 0 && declared_parts != rig.part_count())
    throw ParseError("declared parts: " + std::to_string(declared_parts) +
                     " but found " + std::to_string(rig.part_count()));

  for (int k = 0; k < rig.part_count(); ++k) {
    RigPart& p = rig.parts[k];
    if (k < static_cast<int>(has_pending.size()) && has_pending[k]) {
      if (!p.schedule.empty())
        throw ParseError("part " + std::to_string(k) +
                         ": both schedule and schedule_values given");
      if (p.kind == JointKind::kStatic)
        throw ParseError("part " + std::to_string(k) +
                         ": schedule generator on a static part");
      p.schedule = generate_schedule(pending[k].generator, pending[k].args,
                                     rig.frame_count, p.window_begin,
                                     p.window_end, pending[k].line_no);
    }
    if (p.schedule.empty() && p.kind == JointKind::kStatic)
      p.schedule.assign(rig.frame_count, 0.0);
  }

  try {
    rig.validate();
  } catch (const InvalidInputError& e) {
    throw ParseError(std::string(e.what()) + " in " + path);
  }
  return rig;
}

void save_rig(const RigSpec& rig, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open for writing: " + path);
  char buf[128];
  out << "ARTIKIN-RIG v1\n";
  out << "frames: " << rig.frame_count << "\n";
  out << "parts: " << rig.part_count() << "\n";
  for (int k = 0; k < rig.part_count(); ++k) {
    const RigPart& p = rig.parts[k];
    out << "[part " << k << "]\n";
    out << "kind: " << to_string(p.kind) << "\n";
    if (p.kind != JointKind::kStatic) {
      const Eigen::Vector3d& a = p.axis.direction();
      std::snprintf(buf, sizeof(buf), "axis: %.17g %.17g %.17g\n", a.x(), a.y(),
                    a.z());
      out << buf;
      std::snprintf(buf, sizeof(buf), "pivot: %.17g %.17g %.17g\n", p.pivot.x(),
                    p.pivot.y(), p.pivot.z());
      out << buf;
      out << "window: " << p.window_begin << " " << p.window_end << "\n";
      out << "schedule_values:";
      for (double q : p.schedule) {
        std::snprintf(buf, sizeof(buf), " %.17g", q);
        out << buf;
      }
      out << "\n";
    }
    for (const auto& pt : p.canonical_points) {
      std::snprintf(buf, sizeof(buf), "point: %.17g %.17g %.17g\n", pt.x(),
                    pt.y(), pt.z());
      out << buf;
    }
  }
  if (!out) throw InvalidInputError("write failed: " + path);
}

}  // namespace artikin
