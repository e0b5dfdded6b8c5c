#include "artikin/kinematics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "artikin/errors.hpp"
#include "artikin/parallel.hpp"

namespace artikin {

namespace {

// vee(M - M^T): <[u]x, M>_F = dot(u, asym_vee(M)).
Eigen::Vector3d asym_vee(const Eigen::Matrix3d& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

// Jacobian of the epsilon-guarded normalization a = raw / (|raw| + eps).
Eigen::Matrix3d normalization_jacobian(const Eigen::Vector3d& raw) {
  const double n = raw.norm();
  const double d = n + UnitAxis::kNormEps;
  Eigen::Matrix3d j = Eigen::Matrix3d::Identity() / d;
  if (n > 0.0) j -= raw * raw.transpose() / (n * d * d);
  return j;
}

std::vector<std::vector<int>> group_by_label(const std::vector<int>& labels,
                                             int part_count) {
  std::vector<std::vector<int>> members(part_count);
  for (size_t i = 0; i < labels.size(); ++i)
    members[labels[i]].push_back(static_cast<int>(i));
  return members;
}

std::vector<RigidTransform> part_transforms_at(const ArticulatedModel& model,
                                               int t) {
  std::vector<RigidTransform> tf(model.part_count());
  for (int k = 0; k < model.part_count(); ++k)
    tf[k] = model.part_transform(k, t);
  return tf;
}

Eigen::VectorXd ste_from_scores(const Eigen::VectorXd& scores,
                                const Eigen::VectorXd& p, double tau) {
  const double inner = p.dot(scores);
  return (p.array() * (scores.array() - inner) / tau).matrix();
}

// Gradients of a loss with respect to the kinematic parameters of one part
// at one frame, given the accumulated position gradients of its members:
//   s = sum_i g_i,   M = sum_i g_i (mu_i - c)^T     (revolute)
//   dL/dq    = <dR/dtheta, M>_F
//   dL/dc    = (I - R)^T s
//   dL/da_m  = sin(q) vee_m(M) + (1 - cos(q)) vee_m(-M [a]x - [a]x M)
// followed by the chain through the epsilon-guarded axis normalization.
struct PartFrameGrad {
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  double scalar = 0.0;
};

PartFrameGrad part_frame_gradient(const Joint& joint, double q,
                                  const Eigen::Vector3d& s,
                                  const Eigen::Matrix3d& m_outer) {
  PartFrameGrad g;
  const Eigen::Vector3d a = joint.axis.direction();
  if (joint.kind == JointKind::kRevolute) {
    const Eigen::Matrix3d r = rodrigues(joint.axis, q);
    g.scalar = (rodrigues_dtheta(joint.axis, q).array() * m_outer.array()).sum();
    g.pivot = (Eigen::Matrix3d::Identity() - r).transpose() * s;
    const Eigen::Matrix3d ax = skew(a);
    const Eigen::Vector3d grad_a =
        std::sin(q) * asym_vee(m_outer) +
        (1.0 - std::cos(q)) * asym_vee(-(m_outer * ax) - (ax * m_outer));
    g.axis = normalization_jacobian(a) * grad_a;
  } else if (joint.kind == JointKind::kPrismatic) {
    g.scalar = s.dot(a);
    g.axis = normalization_jacobian(a) * (q * s);
    // pivot is irrelevant to prismatic kinematics and stays frozen
  }
  return g;
}

}  // namespace

void RefineConfig::validate() const {
  if (!(lr_logits > 0.0 && lr_axis_pivot > 0.0 && lr_scalars > 0.0))
    throw InvalidInputError("refine config: learning rates must be positive");
  if (!(lambda_acc >= 0.0 && lambda_z >= 0.0))
    throw InvalidInputError("refine config: negative loss weight");
  if (iterations < 0) throw InvalidInputError("refine config: bad iterations");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw InvalidInputError("refine config: keep fraction outside (0, 1]");
  if (!(prismatic_eigenvalue_ratio > 0.0 && prismatic_eigenvalue_ratio < 1.0))
    throw InvalidInputError("refine config: bad eigenvalue ratio threshold");
  if (!(temperature > 0.0))
    throw InvalidInputError("refine config: temperature must be positive");
  if (threads < 1) throw InvalidInputError("refine config: bad thread count");
}

std::vector<Eigen::Vector3d> robust_center_trajectory(
    const TrackSet& tracks, const std::vector<int>& member_indices,
    double keep_fraction, std::vector<std::string>* warnings) {
  const int m = static_cast<int>(member_indices.size());
  if (m < 1)
    throw InvalidInputError("robust_center_trajectory: no members");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw InvalidInputError("robust_center_trajectory: bad keep fraction");

  const bool plain_mean = m < 5;
  if (plain_mean && warnings)
    warnings->push_back("center trajectory with " + std::to_string(m) +
                        " members: plain mean, no trimming");

  const int keep =
      plain_mean ? m
                 : std::max(1, static_cast<int>(std::floor(keep_fraction * m)));

  std::vector<Eigen::Vector3d> centers(tracks.frame_count);
  std::vector<double> coord(m);
  std::vector<std::pair<double, int>> dist(m);
  for (int t = 0; t < tracks.frame_count; ++t) {
    if (plain_mean) {
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (int i : member_indices) mean += tracks.position(i, t);
      centers[t] = mean / m;
      continue;
    }
    // Component-wise spatial median (mid-pair average for even counts).
    Eigen::Vector3d median;
    for (int c = 0; c < 3; ++c) {
      for (int j = 0; j < m; ++j)
        coord[j] = tracks.position(member_indices[j], t)[c];
      std::sort(coord.begin(), coord.end());
      median[c] = (m % 2 == 1) ? coord[m / 2]
                               : 0.5 * (coord[m / 2 - 1] + coord[m / 2]);
    }
    for (int j = 0; j < m; ++j)
      dist[j] = {(tracks.position(member_indices[j], t) - median).norm(), j};
    std::sort(dist.begin(), dist.end());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j = 0; j < keep; ++j)
      mean += tracks.position(member_indices[dist[j].second], t);
    centers[t] = mean / keep;
  }
  return centers;
}

JointClassification classify_joint(
    const std::vector<Eigen::Vector3d>& center_trajectory,
    const ClassifyThresholds& thresholds) {
  const int t_count = static_cast<int>(center_trajectory.size());
  if (t_count < 3)
    throw InvalidInputError("classify_joint: trajectory too short");

  JointClassification out;
  out.scalars.assign(t_count, 0.0);

  double path_length = 0.0;
  for (int t = 0; t + 1 < t_count; ++t)
    path_length += (center_trajectory[t + 1] - center_trajectory[t]).norm();
  if (path_length < thresholds.static_displacement) {
    out.kind = JointKind::kStatic;
    out.pivot = center_trajectory[0];
    return out;
  }

  const PcaResult components = pca(center_trajectory);
  const double ratio =
      components.eigenvalues[0] > 0.0
          ? components.eigenvalues[1] / components.eigenvalues[0]
          : 0.0;

  if (ratio < thresholds.prismatic_eigenvalue_ratio) {
    out.kind = JointKind::kPrismatic;
    out.pivot = components.centroid;
    Eigen::Vector3d direction = components.component(0);
    std::vector<double> q(t_count, 0.0);
    for (int t = 0; t < t_count; ++t)
      q[t] = direction.dot(center_trajectory[t] - center_trajectory[0]);
    for (int t = 0; t < t_count; ++t) {
      if (q[t] != 0.0) {
        if (q[t] < 0.0) {
          direction = -direction;
          for (double& v : q) v = -v;
        }
        break;
      }
    }
    out.axis = UnitAxis(direction);
    out.scalars = std::move(q);
    return out;
  }

  out.kind = JointKind::kRevolute;
  Eigen::Vector3d axis = components.component(2);

  // Algebraic (Kasa) circle fit in the dominant motion plane:
  // minimize sum (u^2 + v^2 + D u + E v + F)^2 over (D, E, F);
  // the center is (-D/2, -E/2) in plane coordinates.
  const Eigen::Vector3d e1 = components.component(0);
  const Eigen::Vector3d e2 = components.component(1);
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const auto& c : center_trajectory) {
    const Eigen::Vector3d rel = c - components.centroid;
    const Eigen::Vector3d row(rel.dot(e1), rel.dot(e2), 1.0);
    const double rhs = -(row[0] * row[0] + row[1] * row[1]);
    ata += row * row.transpose();
    atb += row * rhs;
  }
  Eigen::Vector3d pivot = components.centroid;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (lu.isInvertible()) {
    const Eigen::Vector3d def = lu.solve(atb);
    pivot += (-0.5 * def[0]) * e1 + (-0.5 * def[1]) * e2;
  }
  out.pivot = pivot;

  // Signed angles about the axis, accumulated frame-to-frame (nearest-branch
  // unwrap; assumes per-frame rotation below pi).
  std::vector<double> q(t_count, 0.0);
  Eigen::Vector3d prev = center_trajectory[0] - pivot;
  prev -= prev.dot(axis) * axis;
  for (int t = 1; t < t_count; ++t) {
    Eigen::Vector3d cur = center_trajectory[t] - pivot;
    cur -= cur.dot(axis) * axis;
    const double delta =
        std::atan2(axis.dot(prev.cross(cur)), prev.dot(cur));
    q[t] = q[t - 1] + delta;
    prev = cur;
  }
  for (int t = 0; t < t_count; ++t) {
    if (q[t] != 0.0) {
      if (q[t] < 0.0) {
        axis = -axis;
        for (double& v : q) v = -v;
      }
      break;
    }
  }
  out.axis = UnitAxis(axis);
  out.scalars = std::move(q);
  return out;
}

InitializeResult initialize(const TrackSet& tracks,
                            const MotionBasisSet& bases,
                            const RefineConfig& config) {
  config.validate();
  const int n = tracks.point_count;
  const int t_count = tracks.frame_count;
  const int k_count = bases.basis_count;
  if (bases.frame_count != t_count ||
      static_cast<int>(bases.logits.rows()) != n)
    throw InvalidInputError("initialize: basis set does not match tracks");

  InitializeResult result;
  ArticulatedModel& model = result.model;
  model.temperature = config.temperature;
  model.canonical_frame = bases.canonical_frame;
  model.assignment_logits = -bases.logits;  // softmax(z) == Stage 1 weights
  model.canonical_points.resize(n);
  for (int i = 0; i < n; ++i)
    model.canonical_points[i] = tracks.position(i, bases.canonical_frame);

  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int b = 1; b < k_count; ++b)
      if (bases.weights(i, b) > bases.weights(i, best)) best = b;
    labels[i] = best;
  }
  const auto members = group_by_label(labels, k_count);

  ClassifyThresholds thresholds;
  thresholds.prismatic_eigenvalue_ratio = config.prismatic_eigenvalue_ratio;
  thresholds.static_displacement =
      config.static_displacement_factor * tracks.bounding_box_diagonal();

  model.parts.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    Joint& joint = model.parts[k];
    joint.scalars.assign(t_count, 0.0);
    if (k == 0) continue;  // static base
    if (members[k].empty()) {
      result.warnings.push_back("part " + std::to_string(k) +
                                " has no points; kept static");
      continue;
    }
    const auto centers = robust_center_trajectory(
        tracks, members[k], config.keep_fraction, &result.warnings);
    JointClassification cls = classify_joint(centers, thresholds);
    if (cls.kind == JointKind::kStatic)
      result.warnings.push_back("part " + std::to_string(k) +
                                " below displacement threshold; kept static");
    joint.kind = cls.kind;
    joint.axis = cls.axis;
    joint.pivot = cls.pivot;
    if (cls.kind != JointKind::kStatic) joint.scalars = std::move(cls.scalars);
  }

  model.validate();
  return result;
}

std::vector<Eigen::Vector3d> forward_model(const ArticulatedModel& model,
                                           int t) {
  const auto transforms = part_transforms_at(model, t);
  std::vector<Eigen::Vector3d> pred(model.point_count());
  for (int i = 0; i < model.point_count(); ++i)
    pred[i] = transforms[model.hard_label(i)].apply(model.canonical_points[i]);
  return pred;
}

FittingLoss fitting_loss(const ArticulatedModel& model, const TrackSet& tracks,
                         int t) {
  if (model.point_count() != tracks.point_count)
    throw InvalidInputError("fitting_loss: point count mismatch");
  const auto pred = forward_model(model, t);
  FittingLoss out;
  out.transform_gradients.assign(model.point_count(),
                                 Eigen::Matrix<double, 3, 4>::Zero());
  for (int i = 0; i < model.point_count(); ++i) {
    const double w = (tracks.visible(i, t) ? 1.0 : 0.0) * tracks.conf(i, t);
    if (w == 0.0) continue;
    const Eigen::Vector3d r = pred[i] - tracks.position(i, t);
    out.loss += w * r.squaredNorm();
    Eigen::Vector4d h;
    h << model.canonical_points[i], 1.0;
    out.transform_gradients[i] = 2.0 * w * r * h.transpose();
  }
  return out;
}

Eigen::VectorXd ste_gradient(const Eigen::Matrix<double, 3, 4>& loss_gradient,
                             const std::vector<RigidTransform>& part_transforms,
                             const Eigen::VectorXd& probabilities, double tau) {
  const int k_count = static_cast<int>(part_transforms.size());
  if (probabilities.size() != k_count)
    throw InvalidInputError("ste_gradient: probability/transform mismatch");
  Eigen::VectorXd scores(k_count);
  for (int j = 0; j < k_count; ++j)
    scores[j] =
        (loss_gradient.array() * part_transforms[j].matrix3x4().array()).sum();
  return ste_from_scores(scores, probabilities, tau);
}

AccelerationLoss acceleration_loss(const ArticulatedModel& model) {
  const int t_count = model.frame_count();
  if (t_count < 3)
    throw InvalidInputError("acceleration_loss: need at least 3 frames");
  AccelerationLoss out;
  out.scalar_gradients.assign(model.part_count(),
                              std::vector<double>(t_count, 0.0));
  for (int k = 0; k < model.part_count(); ++k) {
    const Joint& joint = model.parts[k];
    if (joint.kind == JointKind::kStatic) continue;
    auto& grad = out.scalar_gradients[k];
    for (int t = 1; t + 1 < t_count; ++t) {
      const double a =
          joint.scalars[t + 1] - 2.0 * joint.scalars[t] + joint.scalars[t - 1];
      out.loss += a * a;
      grad[t + 1] += 2.0 * a;
      grad[t] -= 4.0 * a;
      grad[t - 1] += 2.0 * a;
    }
  }
  return out;
}

namespace {

// Shared scaffold: predicted positions for every (point, frame).
std::vector<Eigen::Vector3d> predict_all(
    const ArticulatedModel& model, const std::vector<int>& labels,
    const std::vector<std::vector<RigidTransform>>& transforms, int threads) {
  const int n = model.point_count();
  const int t_count = model.frame_count();
  std::vector<Eigen::Vector3d> pred(static_cast<size_t>(n) * t_count);
  parallel_for(t_count, threads, [&](int t) {
    for (int i = 0; i < n; ++i)
      pred[static_cast<size_t>(i) * t_count + t] =
          transforms[t][labels[i]].apply(model.canonical_points[i]);
  });
  return pred;
}

// Folds a per-(point, frame) position-gradient field into gradients of the
// kinematic parameters; axis and pivot partials are produced in per-frame
// slots and reduced in frame order so results are thread-count independent.
void fold_position_gradients(const ArticulatedModel& model,
                             const std::vector<int>& labels,
                             const std::vector<Eigen::Vector3d>& pos_grad,
                             ModelGradients* grads, int threads) {
  const int n = model.point_count();
  const int t_count = model.frame_count();
  const int k_count = model.part_count();
  const auto members = group_by_label(labels, k_count);

  std::vector<PartFrameGrad> slots(static_cast<size_t>(k_count) * t_count);
  parallel_for(t_count, threads, [&](int t) {
    for (int k = 0; k < k_count; ++k) {
      const Joint& joint = model.parts[k];
      if (joint.kind == JointKind::kStatic) continue;
      Eigen::Vector3d s = Eigen::Vector3d::Zero();
      Eigen::Matrix3d m_outer = Eigen::Matrix3d::Zero();
      for (int i : members[k]) {
        const Eigen::Vector3d& g = pos_grad[static_cast<size_t>(i) * t_count + t];
        s += g;
        if (joint.kind == JointKind::kRevolute)
          m_outer += g * (model.canonical_points[i] - joint.pivot).transpose();
      }
      slots[static_cast<size_t>(k) * t_count + t] =
          part_frame_gradient(joint, joint.scalars[t], s, m_outer);
    }
  });
  for (int k = 0; k < k_count; ++k) {
    for (int t = 0; t < t_count; ++t) {
      const PartFrameGrad& g = slots[static_cast<size_t>(k) * t_count + t];
      grads->axis[k] += g.axis;
      grads->pivot[k] += g.pivot;
      grads->scalars[k][t] += g.scalar;
    }
  }
  (void)n;
}

ModelGradients make_zero_gradients(const ArticulatedModel& model) {
  ModelGradients g;
  g.logits = Eigen::MatrixXd::Zero(model.point_count(), model.part_count());
  g.axis.assign(model.part_count(), Eigen::Vector3d::Zero());
  g.pivot.assign(model.part_count(), Eigen::Vector3d::Zero());
  g.scalars.assign(model.part_count(),
                   std::vector<double>(model.frame_count(), 0.0));
  return g;
}

void check_view_axes(const std::vector<Eigen::Vector3d>& view_axes,
                     int t_count) {
  if (static_cast<int>(view_axes.size()) != t_count)
    throw InvalidInputError("view axes: need one per frame");
  for (const auto& z : view_axes)
    if (std::abs(z.norm() - 1.0) > 1e-9)
      throw InvalidInputError("view axes: non-unit axis");
}

}  // namespace

DepthStabilityLoss depth_stability_loss(
    const ArticulatedModel& model, const TrackSet& tracks,
    const std::vector<Eigen::Vector3d>& view_axes,
    const Eigen::VectorXd& omega) {
  const int n = model.point_count();
  const int t_count = model.frame_count();
  if (tracks.point_count != n || tracks.frame_count != t_count)
    throw InvalidInputError("depth_stability_loss: track shape mismatch");
  check_view_axes(view_axes, t_count);
  if (omega.size() != n)
    throw InvalidInputError("depth_stability_loss: omega size mismatch");

  const auto labels = model.hard_labels();
  std::vector<std::vector<RigidTransform>> transforms(t_count);
  for (int t = 0; t < t_count; ++t) transforms[t] = part_transforms_at(model, t);
  const auto pred = predict_all(model, labels, transforms, 1);

  DepthStabilityLoss out;
  std::vector<Eigen::Vector3d> pos_grad(static_cast<size_t>(n) * t_count,
                                        Eigen::Vector3d::Zero());
  for (int i = 0; i < n; ++i) {
    for (int t = 1; t < t_count; ++t) {
      const size_t cur = static_cast<size_t>(i) * t_count + t;
      const double d = (pred[cur] - pred[cur - 1]).dot(view_axes[t]);
      out.loss += omega[i] * d * d;
      pos_grad[cur] += 2.0 * omega[i] * d * view_axes[t];
      pos_grad[cur - 1] -= 2.0 * omega[i] * d * view_axes[t];
    }
  }

  ModelGradients grads = make_zero_gradients(model);
  fold_position_gradients(model, labels, pos_grad, &grads, 1);
  out.scalar_gradients = std::move(grads.scalars);
  return out;
}

ObjectiveValue evaluate_objective(const ArticulatedModel& model,
                                  const TrackSet& tracks,
                                  const RefineConfig& config,
                                  const Eigen::VectorXd& omega,
                                  ModelGradients* grads) {
  const int n = model.point_count();
  const int t_count = model.frame_count();
  const int k_count = model.part_count();
  if (tracks.point_count != n || tracks.frame_count != t_count)
    throw InvalidInputError("evaluate_objective: track shape mismatch");
  const bool use_depth = !config.view_axes.empty() && config.lambda_z > 0.0;
  if (use_depth) {
    check_view_axes(config.view_axes, t_count);
    if (omega.size() != n)
      throw InvalidInputError("evaluate_objective: omega size mismatch");
  }

  const auto labels = model.hard_labels();
  std::vector<std::vector<RigidTransform>> transforms(t_count);
  parallel_for(t_count, config.threads,
               [&](int t) { transforms[t] = part_transforms_at(model, t); });
  const auto pred = predict_all(model, labels, transforms, config.threads);

  // Per-frame loss slots and the position-gradient field of the total
  // objective (fitting plus weighted depth term).
  std::vector<double> fit_slot(t_count, 0.0), depth_slot(t_count, 0.0);
  std::vector<Eigen::Vector3d> pos_grad(static_cast<size_t>(n) * t_count,
                                        Eigen::Vector3d::Zero());
  parallel_for(t_count, config.threads, [&](int t) {
    for (int i = 0; i < n; ++i) {
      const size_t cur = static_cast<size_t>(i) * t_count + t;
      const double w = (tracks.visible(i, t) ? 1.0 : 0.0) * tracks.conf(i, t);
      if (w > 0.0) {
        const Eigen::Vector3d r = pred[cur] - tracks.position(i, t);
        fit_slot[t] += w * r.squaredNorm();
        pos_grad[cur] += 2.0 * w * r;
      }
      if (use_depth) {
        if (t >= 1) {
          const double d =
              (pred[cur] - pred[cur - 1]).dot(config.view_axes[t]);
          depth_slot[t] += omega[i] * d * d;
          pos_grad[cur] +=
              config.lambda_z * 2.0 * omega[i] * d * config.view_axes[t];
        }
        if (t + 1 < t_count) {
          const double d =
              (pred[cur + 1] - pred[cur]).dot(config.view_axes[t + 1]);
          pos_grad[cur] -=
              config.lambda_z * 2.0 * omega[i] * d * config.view_axes[t + 1];
        }
      }
    }
  });

  ObjectiveValue value;
  for (int t = 0; t < t_count; ++t) {
    value.fitting += fit_slot[t];
    value.depth += depth_slot[t];
  }
  const AccelerationLoss acc = acceleration_loss(model);
  value.acceleration = acc.loss;
  value.total = value.fitting + config.lambda_acc * value.acceleration +
                config.lambda_z * value.depth;

  if (!grads) return value;

  *grads = make_zero_gradients(model);
  fold_position_gradients(model, labels, pos_grad, grads, config.threads);
  for (int k = 0; k < k_count; ++k)
    for (int t = 0; t < t_count; ++t)
      grads->scalars[k][t] += config.lambda_acc * acc.scalar_gradients[k][t];

  // Assignment gradients: straight-through estimator against the soft
  // mixture, driven by the same position-gradient field.
  parallel_for(n, config.threads, [&](int i) {
    const Eigen::VectorXd p = model.assignment_probabilities(i);
    Eigen::VectorXd scores(k_count);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(k_count);
    for (int t = 0; t < t_count; ++t) {
      const Eigen::Vector3d& g = pos_grad[static_cast<size_t>(i) * t_count + t];
      if (g.isZero(0.0)) continue;
      for (int j = 0; j < k_count; ++j)
        scores[j] = g.dot(transforms[t][j].apply(model.canonical_points[i]));
      row += ste_from_scores(scores, p, model.temperature);
    }
    grads->logits.row(i) = row;
  });

  return value;
}

namespace {

// Adam is scale-free: a consistent gradient of any magnitude produces
// learning-rate-sized steps, so rounding dust at an exact optimum would
// ignite limit cycles. Components below this carry no signal and are
// dropped before the moment update.
constexpr double kGradientDeadband = 1e-13;

// Adam state over a flat parameter vector.
struct AdamState {
  Eigen::VectorXd m, v;
  explicit AdamState(Eigen::Index size)
      : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}

  Eigen::VectorXd step(const Eigen::VectorXd& grad_in, double lr, double beta1,
                       double beta2, double eps, int iteration) {
    Eigen::VectorXd grad = grad_in;
    for (Eigen::Index i = 0; i < grad.size(); ++i)
      if (std::abs(grad[i]) < kGradientDeadband) grad[i] = 0.0;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad).eval();
    const double bc1 = 1.0 - std::pow(beta1, iteration);
    const double bc2 = 1.0 - std::pow(beta2, iteration);
    return (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps))
        .matrix();
  }
};

}  // namespace

RefineResult refine(const ArticulatedModel& initial, const TrackSet& tracks,
                    const RefineConfig& config) {
  config.validate();
  initial.validate();

  RefineResult result;
  ArticulatedModel& model = result.model;
  model = initial;
  const int n = model.point_count();
  const int t_count = model.frame_count();
  const int k_count = model.part_count();
  const int t0 = model.canonical_frame;

  // Depth-term weights frozen at entry (Stage 1 static probabilities when
  // refine follows initialize directly).
  Eigen::VectorXd omega(n);
  for (int i = 0; i < n; ++i) omega[i] = model.assignment_probabilities(i)[0];

  AdamState adam_logits(static_cast<Eigen::Index>(n) * k_count);
  AdamState adam_axis_pivot(static_cast<Eigen::Index>(k_count) * 6);
  AdamState adam_scalars(static_cast<Eigen::Index>(k_count) * t_count);

  double initial_loss = -1.0;
  for (int it = 1; it <= config.iterations; ++it) {
    ModelGradients grads;
    const ObjectiveValue value =
        evaluate_objective(model, tracks, config, omega, &grads);
    result.loss_history.push_back(value.total);
    if (initial_loss < 0.0) initial_loss = value.total;
    // Absolute floor so rounding dust at a perfect fit never reads as
    // divergence.
    constexpr double kDivergenceFloor = 1e-9;
    if (value.total > config.divergence_factor * initial_loss +
                          kDivergenceFloor)
      throw DivergenceError(
          "refine diverged at iteration " + std::to_string(it) + ": loss " +
          std::to_string(value.total) + " vs initial " +
          std::to_string(initial_loss));

    // Logits.
    {
      Eigen::VectorXd flat(static_cast<Eigen::Index>(n) * k_count);
      for (int i = 0; i < n; ++i)
        flat.segment(static_cast<Eigen::Index>(i) * k_count, k_count) =
            grads.logits.row(i);
      const Eigen::VectorXd delta =
          adam_logits.step(flat, config.lr_logits, config.adam_beta1,
                           config.adam_beta2, config.adam_eps, it);
      for (int i = 0; i < n; ++i)
        model.assignment_logits.row(i) -=
            delta.segment(static_cast<Eigen::Index>(i) * k_count, k_count);
    }

    // Axes and pivots (prismatic pivots carry zero gradient and stay put).
    {
      Eigen::VectorXd flat =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k_count) * 6);
      for (int k = 0; k < k_count; ++k) {
        flat.segment(k * 6, 3) = grads.axis[k];
        flat.segment(k * 6 + 3, 3) = grads.pivot[k];
      }
      const Eigen::VectorXd delta =
          adam_axis_pivot.step(flat, config.lr_axis_pivot, config.adam_beta1,
                               config.adam_beta2, config.adam_eps, it);
      for (int k = 0; k < k_count; ++k) {
        Joint& joint = model.parts[k];
        if (joint.kind == JointKind::kStatic) continue;
        const Eigen::Vector3d raw =
            joint.axis.direction() - delta.segment(k * 6, 3);
        joint.axis = UnitAxis(raw);  // renormalize every step
        if (joint.kind == JointKind::kRevolute)
          joint.pivot -= delta.segment(k * 6 + 3, 3);
      }
    }

    // Scalars; the canonical frame stays pinned at zero.
    {
      Eigen::VectorXd flat =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k_count) * t_count);
      for (int k = 0; k < k_count; ++k)
        for (int t = 0; t < t_count; ++t)
          if (t != t0) flat[k * t_count + t] = grads.scalars[k][t];
      const Eigen::VectorXd delta =
          adam_scalars.step(flat, config.lr_scalars, config.adam_beta1,
                            config.adam_beta2, config.adam_eps, it);
      for (int k = 0; k < k_count; ++k) {
        Joint& joint = model.parts[k];
        if (joint.kind == JointKind::kStatic) continue;
        for (int t = 0; t < t_count; ++t)
          if (t != t0) joint.scalars[t] -= delta[k * t_count + t];
        joint.scalars[t0] = 0.0;
      }
    }
  }

  const ObjectiveValue final_value =
      evaluate_objective(model, tracks, config, omega, nullptr);
  result.loss_history.push_back(final_value.total);
  return result;
}

}  // namespace artikin
