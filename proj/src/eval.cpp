#include "artikin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"

namespace artikin {

namespace {

constexpr int kChamferCap = 10000;
constexpr double kUnmatchableCost = 1e15;

// Exact nearest-neighbor search over a 3D point set. Median-split k-d tree
// with backtracking; queries prune on the splitting-plane distance, so the
// returned distance equals the brute-force minimum.
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Eigen::Vector3d>& points)
      : points_(points), order_(points.size()) {
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(2 * points.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(points.size()));
  }

  double nearest_distance(const Eigen::Vector3d& query) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, query, best);
    return std::sqrt(best);
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    int axis = -1;       // -1 marks a leaf
    double split = 0.0;
    int begin = 0, end = 0;  // leaf range in order_
    int left = -1, right = -1;
  };

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    Eigen::Vector3d lo = points_[order_[begin]];
    Eigen::Vector3d hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(int node_index, const Eigen::Vector3d& q, double& best) const {
    const Node& node = nodes_[node_index];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i)
        best = std::min(best, (points_[order_[i]] - q).squaredNorm());
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (diff * diff < best) search(far, q, best);
  }

  const std::vector<Eigen::Vector3d>& points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

std::vector<Eigen::Vector3d> cap_points(const std::vector<Eigen::Vector3d>& p) {
  const int n = static_cast<int>(p.size());
  if (n <= kChamferCap) return p;
  std::vector<Eigen::Vector3d> out;
  out.reserve(kChamferCap);
  for (int j = 0; j < kChamferCap; ++j)
    out.push_back(p[static_cast<size_t>(
        static_cast<long long>(j) * n / kChamferCap)]);
  return out;
}

double directed_chamfer(const std::vector<Eigen::Vector3d>& from,
                        const KdTree3& to_tree) {
  double sum = 0.0;
  for (const auto& p : from) sum += to_tree.nearest_distance(p);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double EvalReport::mean_axis_error_deg() const {
  double sum = 0.0;
  int count = 0;
  for (const auto& p : parts)
    if (p.pred_part >= 0) {
      sum += p.axis_error_deg;
      ++count;
    }
  return count > 0 ? sum / count : 0.0;
}

double EvalReport::mean_position_error() const {
  double sum = 0.0;
  int count = 0;
  for (const auto& p : parts)
    if (p.pred_part >= 0) {
      sum += p.position_error;
      ++count;
    }
  return count > 0 ? sum / count : 0.0;
}

double axis_error(const UnitAxis& pred, const UnitAxis& gt) {
  const double d =
      std::clamp(std::abs(pred.direction().dot(gt.direction())), 0.0, 1.0);
  return std::acos(d) * 180.0 / std::numbers::pi;
}

double position_error(const Eigen::Vector3d& pred_pivot,
                      const Eigen::Vector3d& gt_line_point,
                      const UnitAxis& gt_line_direction) {
  const Eigen::Vector3d rel = pred_pivot - gt_line_point;
  const Eigen::Vector3d a = gt_line_direction.direction();
  return (rel - rel.dot(a) * a).norm();
}

double epe(const std::vector<Eigen::Vector3d>& pred_tracks,
           const std::vector<Eigen::Vector3d>& gt_tracks,
           const std::vector<std::uint8_t>& mask) {
  if (pred_tracks.size() != gt_tracks.size() ||
      pred_tracks.size() != mask.size())
    throw InvalidInputError("epe: shape mismatch");
  double sum = 0.0;
  long count = 0;
  for (size_t s = 0; s < pred_tracks.size(); ++s) {
    if (!mask[s]) continue;
    sum += (pred_tracks[s] - gt_tracks[s]).norm();
    ++count;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double chamfer(const std::vector<Eigen::Vector3d>& a,
               const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty())
    throw InvalidInputError("chamfer: empty point set");
  const auto ca = cap_points(a);
  const auto cb = cap_points(b);
  const KdTree3 tree_a(ca);
  const KdTree3 tree_b(cb);
  return directed_chamfer(ca, tree_b) + directed_chamfer(cb, tree_a);
}

std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  const bool transposed = rows > cols;
  Eigen::MatrixXd c = cost;
  if (transposed) c = cost.transpose();
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());

  // Potential-based Hungarian with augmenting paths (1-based scratch).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;

  if (!transposed) return row_to_col;
  std::vector<int> out(rows, -1);
  for (int i = 0; i < n; ++i)
    if (row_to_col[i] >= 0) out[row_to_col[i]] = i;
  return out;
}

namespace {

// Centroid of the canonical points carrying hard label k; empty parts are
// unmatchable.
std::vector<Eigen::Vector3d> part_centroids(const ArticulatedModel& model,
                                            std::vector<bool>* nonempty) {
  const auto labels = model.hard_labels();
  std::vector<Eigen::Vector3d> centroids(model.part_count(),
                                         Eigen::Vector3d::Zero());
  std::vector<int> counts(model.part_count(), 0);
  for (int i = 0; i < model.point_count(); ++i) {
    centroids[labels[i]] += model.canonical_points[i];
    ++counts[labels[i]];
  }
  nonempty->assign(model.part_count(), false);
  for (int k = 0; k < model.part_count(); ++k) {
    if (counts[k] > 0) {
      centroids[k] /= counts[k];
      (*nonempty)[k] = true;
    }
  }
  return centroids;
}

}  // namespace

EvalReport evaluate(const ArticulatedModel& model,
                    const ArticulatedModel& ground_truth,
                    const TrackSet& tracks) {
  if (model.point_count() != ground_truth.point_count() ||
      model.point_count() != tracks.point_count)
    throw InvalidInputError("evaluate: models and tracks disagree on N");
  if (model.frame_count() != ground_truth.frame_count())
    throw InvalidInputError("evaluate: models disagree on frame count");
  const int t_count = model.frame_count();
  const int n = model.point_count();

  EvalReport report;

  std::vector<bool> pred_nonempty, gt_nonempty;
  const auto pred_centroids = part_centroids(model, &pred_nonempty);
  const auto gt_centroids = part_centroids(ground_truth, &gt_nonempty);

  std::vector<int> gt_dynamic, pred_dynamic;
  for (int k = 1; k < ground_truth.part_count(); ++k) gt_dynamic.push_back(k);
  for (int k = 1; k < model.part_count(); ++k) pred_dynamic.push_back(k);

  Eigen::MatrixXd cost(gt_dynamic.size(), pred_dynamic.size());
  for (size_t r = 0; r < gt_dynamic.size(); ++r)
    for (size_t c = 0; c < pred_dynamic.size(); ++c) {
      const int gk = gt_dynamic[r];
      const int pk = pred_dynamic[c];
      cost(r, c) = (gt_nonempty[gk] && pred_nonempty[pk])
                       ? (gt_centroids[gk] - pred_centroids[pk]).norm()
                       : kUnmatchableCost;
    }
  const auto assignment = hungarian_assignment(cost);

  std::vector<bool> pred_used(pred_dynamic.size(), false);
  int kind_matches = 0;
  for (size_t r = 0; r < gt_dynamic.size(); ++r) {
    PartEval pe;
    pe.gt_part = gt_dynamic[r];
    pe.gt_kind = ground_truth.parts[pe.gt_part].kind;
    const int c = assignment[r];
    if (c >= 0 && cost(r, c) < kUnmatchableCost) {
      pred_used[c] = true;
      pe.pred_part = pred_dynamic[c];
      const Joint& pred_joint = model.parts[pe.pred_part];
      const Joint& gt_joint = ground_truth.parts[pe.gt_part];
      pe.pred_kind = pred_joint.kind;
      pe.kind_match = pe.pred_kind == pe.gt_kind;
      if (pe.kind_match) ++kind_matches;
      const bool both_dynamic = pred_joint.kind != JointKind::kStatic &&
                                gt_joint.kind != JointKind::kStatic;
      pe.axis_error_deg =
          both_dynamic ? axis_error(pred_joint.axis, gt_joint.axis) : 90.0;
      pe.position_error =
          position_error(pred_joint.pivot, gt_joint.pivot, gt_joint.axis);
    } else {
      report.unmatched_gt_parts.push_back(pe.gt_part);
    }
    report.parts.push_back(pe);
  }
  for (size_t c = 0; c < pred_dynamic.size(); ++c)
    if (!pred_used[c]) report.unmatched_pred_parts.push_back(pred_dynamic[c]);

  report.joint_type_accuracy =
      gt_dynamic.empty()
          ? 1.0
          : static_cast<double>(kind_matches) / gt_dynamic.size();

  // EPE between the two forward models over every frame.
  std::vector<Eigen::Vector3d> pred_all(static_cast<size_t>(n) * t_count);
  std::vector<Eigen::Vector3d> gt_all(static_cast<size_t>(n) * t_count);
  for (int t = 0; t < t_count; ++t) {
    const auto p = forward_model(model, t);
    const auto g = forward_model(ground_truth, t);
    for (int i = 0; i < n; ++i) {
      pred_all[static_cast<size_t>(i) * t_count + t] = p[i];
      gt_all[static_cast<size_t>(i) * t_count + t] = g[i];
    }
  }
  report.epe = epe(pred_all, gt_all,
                   std::vector<std::uint8_t>(pred_all.size(), 1));

  // Final-frame Chamfer split by ground-truth labels.
  const auto gt_labels = ground_truth.hard_labels();
  const auto pred_final = forward_model(model, t_count - 1);
  const auto gt_final = forward_model(ground_truth, t_count - 1);
  std::vector<Eigen::Vector3d> pm, gm, ps, gs;
  for (int i = 0; i < n; ++i) {
    if (gt_labels[i] == 0) {
      ps.push_back(pred_final[i]);
      gs.push_back(gt_final[i]);
    } else {
      pm.push_back(pred_final[i]);
      gm.push_back(gt_final[i]);
    }
  }
  report.chamfer_whole = chamfer(pred_final, gt_final);
  report.chamfer_movable = pm.empty() ? 0.0 : chamfer(pm, gm);
  report.chamfer_static = ps.empty() ? 0.0 : chamfer(ps, gs);

  return report;
}

}  // namespace artikin
