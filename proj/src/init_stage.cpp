#include "artikin/init_stage.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "artikin/errors.hpp"
#include "artikin/parallel.hpp"

namespace artikin {

namespace {

constexpr double kLogitEps = 1e-7;
// Confidence multiplier for samples that are interpolated rather than seen;
// keeps every point usable as a Procrustes anchor at the canonical frame.
constexpr double kInvisibleWeight = 0.1;

double sample_weight(const TrackSet& tracks, int i, int t) {
  return tracks.conf(i, t) * (tracks.visible(i, t) ? 1.0 : kInvisibleWeight);
}

}  // namespace

Eigen::MatrixXd weighted_speed(const TrackSet& tracks) {
  const int n = tracks.point_count;
  const int t_count = tracks.frame_count;
  Eigen::MatrixXd speeds(n, t_count - 1);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t + 1 < t_count; ++t) {
      const double visible_pair =
          (tracks.visible(i, t) && tracks.visible(i, t + 1)) ? 1.0 : 0.0;
      const double w =
          visible_pair * 0.5 * (tracks.conf(i, t) + tracks.conf(i, t + 1));
      speeds(i, t) =
          (tracks.position(i, t + 1) - tracks.position(i, t)).norm() * w;
    }
  }
  return speeds;
}

MotionEnergy motion_energy(const Eigen::MatrixXd& speeds, int part_count,
                           int horizon_begin, int horizon_end) {
  const int intervals_total = static_cast<int>(speeds.cols());
  if (part_count < 2)
    throw InvalidInputError("motion_energy: need at least 2 parts");
  if (horizon_begin < 0 || horizon_end > intervals_total ||
      horizon_begin >= horizon_end)
    throw InvalidInputError("motion_energy: bad horizon");

  const int segments = part_count - 1;
  const int span = horizon_end - horizon_begin;  // interval count
  if (segments > span)
    throw InvalidInputError(
        "motion_energy: more segments than horizon intervals");

  MotionEnergy e;
  e.weighted_speeds = speeds;
  e.horizon_begin = horizon_begin;
  e.horizon_end = horizon_end;
  e.segment_energy = Eigen::MatrixXd::Zero(speeds.rows(), segments);

  // Equal split with the remainder spread over the earliest segments.
  int cursor = horizon_begin;
  for (int s = 0; s < segments; ++s) {
    const int size = span / segments + (s < span % segments ? 1 : 0);
    e.segment_boundaries.emplace_back(cursor, cursor + size);
    for (int i = 0; i < speeds.rows(); ++i)
      for (int t = cursor; t < cursor + size; ++t)
        e.segment_energy(i, s) += speeds(i, t);
    cursor += size;
  }
  return e;
}

TemporalAssignment assign_parts_temporal(const MotionEnergy& energy,
                                         int part_count) {
  const int n = static_cast<int>(energy.segment_energy.rows());
  const int segments = static_cast<int>(energy.segment_energy.cols());
  if (segments != part_count - 1)
    throw InvalidInputError(
        "assign_parts_temporal: energy computed with a different K");

  Eigen::VectorXd max_energy(n);
  std::vector<int> peak_segment(n);
  for (int i = 0; i < n; ++i) {
    double best = energy.segment_energy(i, 0);
    int arg = 0;
    for (int s = 1; s < segments; ++s) {
      if (energy.segment_energy(i, s) > best) {  // ties keep the earlier segment
        best = energy.segment_energy(i, s);
        arg = s;
      }
    }
    max_energy[i] = best;
    peak_segment[i] = arg;
  }

  // Nearest-rank 20th percentile of the per-point peak energies.
  std::vector<double> sorted(max_energy.data(), max_energy.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const int rank = std::max(
      0, static_cast<int>(std::ceil(0.2 * n)) - 1);
  const double tau = sorted[rank];

  TemporalAssignment a;
  a.static_threshold = tau;
  a.labels.resize(n);
  a.logits.resize(n, part_count);
  for (int i = 0; i < n; ++i) {
    // Exactly-zero energy is static regardless of the percentile value.
    const bool is_static = max_energy[i] == 0.0 || max_energy[i] < tau;
    a.labels[i] = is_static ? 0 : peak_segment[i] + 1;

    const double denom = max_energy[i] + tau;
    const double static_ratio = denom > 0.0 ? tau / denom : 1.0;
    a.logits(i, 0) = -std::log(static_ratio + kLogitEps);

    const double total = energy.segment_energy.row(i).sum();
    for (int s = 0; s < segments; ++s) {
      const double ratio =
          total > 0.0 ? energy.segment_energy(i, s) / total : 0.0;
      a.logits(i, 1 + s) = -std::log(ratio + kLogitEps);
    }
  }
  return a;
}

MotionBasisSet fit_motion_bases(const TrackSet& tracks,
                                const std::vector<int>& labels,
                                const Eigen::MatrixXd& logits,
                                int canonical_frame, int threads) {
  const int n = tracks.point_count;
  const int t_count = tracks.frame_count;
  if (static_cast<int>(labels.size()) != n)
    throw InvalidInputError("fit_motion_bases: label count mismatch");
  if (canonical_frame < 0 || canonical_frame >= t_count)
    throw InvalidInputError("fit_motion_bases: canonical frame out of range");
  const int basis_count = static_cast<int>(logits.cols());

  MotionBasisSet bases;
  bases.basis_count = basis_count;
  bases.frame_count = t_count;
  bases.canonical_frame = canonical_frame;
  bases.transforms.assign(static_cast<size_t>(basis_count) * t_count,
                          RigidTransform::identity());
  bases.logits = logits;
  bases.weights.resize(n, basis_count);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd neg = -logits.row(i);
    const double m = neg.maxCoeff();
    Eigen::VectorXd w = (neg.array() - m).exp();
    bases.weights.row(i) = w / w.sum();
  }

  std::vector<std::vector<int>> members(basis_count);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= basis_count)
      throw InvalidInputError("fit_motion_bases: label out of range");
    members[labels[i]].push_back(i);
  }

  for (int b = 0; b < basis_count; ++b) {
    const auto& idx = members[b];
    const bool tiny_cluster = idx.size() < 3;
    if (tiny_cluster)
      bases.warnings.push_back("cluster " + std::to_string(b) + " has " +
                               std::to_string(idx.size()) +
                               " points; using centroid-translation basis");

    std::vector<Eigen::Vector3d> src(idx.size());
    std::vector<double> anchor(idx.size());
    for (size_t m = 0; m < idx.size(); ++m) {
      src[m] = tracks.position(idx[m], canonical_frame);
      anchor[m] = sample_weight(tracks, idx[m], canonical_frame);
    }

    std::atomic<bool> degenerate_seen{false};
    parallel_for(t_count, threads, [&](int t) {
      if (t == canonical_frame) return;  // identity by construction
      std::vector<Eigen::Vector3d> dst(idx.size());
      std::vector<double> w(idx.size());
      double total = 0.0;
      for (size_t m = 0; m < idx.size(); ++m) {
        dst[m] = tracks.position(idx[m], t);
        w[m] = anchor[m] * sample_weight(tracks, idx[m], t);
        total += w[m];
      }
      if (total <= 0.0) w.assign(idx.size(), 1.0);

      RigidTransform tf;
      bool fallback = tiny_cluster;
      if (!fallback) {
        try {
          tf = weighted_procrustes(src, dst, w);
        } catch (const DegenerateGeometryError&) {
          fallback = true;
          degenerate_seen = true;
        }
      }
      if (fallback) {
        // Identity rotation, weighted centroid displacement.
        double wsum = 0.0;
        Eigen::Vector3d from = Eigen::Vector3d::Zero();
        Eigen::Vector3d to = Eigen::Vector3d::Zero();
        for (size_t m = 0; m < idx.size(); ++m) {
          const double wm = w.empty() ? 1.0 : w[m];
          from += wm * src[m];
          to += wm * dst[m];
          wsum += wm;
        }
        tf = RigidTransform::identity();
        if (wsum > 0.0) tf.translation = (to - from) / wsum;
      }
      bases.transforms[static_cast<size_t>(b) * t_count + t] = tf;
    });
    if (degenerate_seen && !tiny_cluster)
      bases.warnings.push_back("cluster " + std::to_string(b) +
                               " degenerate at some frames; centroid fallback");
  }
  return bases;
}

RigidTransform blend_transform(const Eigen::VectorXd& weights,
                               const std::vector<RigidTransform>& bases_at_t) {
  if (weights.size() != static_cast<Eigen::Index>(bases_at_t.size()))
    throw InvalidInputError("blend_transform: weight/basis count mismatch");
  Eigen::Matrix3d r = Eigen::Matrix3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  for (size_t b = 0; b < bases_at_t.size(); ++b) {
    r += weights[b] * bases_at_t[b].rotation;
    t += weights[b] * bases_at_t[b].translation;
  }
  return project_to_se3(r, t);
}

std::pair<Eigen::Vector3d, Eigen::Matrix3d> reconstruct_point(
    const Eigen::Vector3d& canonical_position,
    const Eigen::Matrix3d& canonical_orientation,
    const RigidTransform& blend) {
  return {blend.apply(canonical_position),
          blend.rotation * canonical_orientation};
}

MotionBasisSet run_stage1(const TrackSet& tracks, int part_count,
                          int horizon_begin, int horizon_end,
                          int canonical_frame, int threads) {
  if (horizon_end < 0) horizon_end = tracks.frame_count - 1;
  const Eigen::MatrixXd speeds = weighted_speed(tracks);
  const MotionEnergy energy =
      motion_energy(speeds, part_count, horizon_begin, horizon_end);
  const TemporalAssignment assignment =
      assign_parts_temporal(energy, part_count);
  return fit_motion_bases(tracks, assignment.labels, assignment.logits,
                          canonical_frame, threads);
}

void save_motion_bases(const MotionBasisSet& bases, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open for writing: " + path);
  out << "ARTIKIN-BASES v1\n";
  out << "bases: " << bases.basis_count << "\n";
  out << "frames: " << bases.frame_count << "\n";
  out << "points: " << bases.logits.rows() << "\n";
  out << "canonical_frame: " << bases.canonical_frame << "\n";
  char buf[64];
  for (int b = 0; b < bases.basis_count; ++b) {
    out << "[basis " << b << "]\n";
    for (int t = 0; t < bases.frame_count; ++t) {
      const RigidTransform& tf = bases.transform(b, t);
      out << "frame: " << t;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          std::snprintf(buf, sizeof(buf), " %.17g", tf.rotation(r, c));
          out << buf;
        }
      for (int r = 0; r < 3; ++r) {
        std::snprintf(buf, sizeof(buf), " %.17g", tf.translation[r]);
        out << buf;
      }
      out << "\n";
    }
  }
  out << "[logits]\n";
  for (int i = 0; i < bases.logits.rows(); ++i) {
    out << "row:";
    for (int b = 0; b < bases.basis_count; ++b) {
      std::snprintf(buf, sizeof(buf), " %.17g", bases.logits(i, b));
      out << buf;
    }
    out << "\n";
  }
  for (const auto& w : bases.warnings) out << "# warning: " << w << "\n";
  if (!out) throw InvalidInputError("write failed: " + path);
}

}  // namespace artikin
