#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "artikin/init_stage.hpp"
#include "artikin/model.hpp"
#include "artikin/tracks.hpp"

namespace artikin {

// Optimization settings for the refinement stage. Learning-rate defaults:
// logits 5e-3, axis/pivot 1e-4, scalars 5e-3.
struct RefineConfig {
  double lr_logits = 5e-3;
  double lr_axis_pivot = 1e-4;
  double lr_scalars = 5e-3;
  double lambda_acc = 0.1;
  double lambda_z = 0.01;
  int iterations = 600;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double keep_fraction = 0.8;
  // Revolute/prismatic split: prismatic when lambda2/lambda1 falls below
  // this; static when the center path length falls below
  // static_displacement_factor * scene bbox diagonal.
  double prismatic_eigenvalue_ratio = 0.01;
  double static_displacement_factor = 1e-9;
  double temperature = 1.0;
  double divergence_factor = 1e3;
  int threads = 1;
  // Per-frame camera optical axes (unit); empty disables the
  // depth-stability term.
  std::vector<Eigen::Vector3d> view_axes;

  void validate() const;
};

struct ClassifyThresholds {
  double prismatic_eigenvalue_ratio = 0.01;
  double static_displacement = 0.0;  // absolute path length, scene units
};

struct JointClassification {
  JointKind kind = JointKind::kStatic;
  UnitAxis axis;
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  std::vector<double> scalars;
};

// Trimmed-mean center trajectory of a member subset: per frame, the mean of
// the keep_fraction of members closest to the component-wise median. Falls
// back to the plain mean (with a warning) below 5 members.
std::vector<Eigen::Vector3d> robust_center_trajectory(
    const TrackSet& tracks, const std::vector<int>& member_indices,
    double keep_fraction, std::vector<std::string>* warnings = nullptr);

// PCA-based joint discovery on a center trajectory: eigenvalue ratio picks
// revolute vs prismatic, the third principal component gives the revolute
// axis, an algebraic circle fit in the motion plane gives the pivot, and the
// scalars are unwrapped signed angles (or axis projections). Trajectories
// shorter than the static displacement threshold come back static.
JointClassification classify_joint(
    const std::vector<Eigen::Vector3d>& center_trajectory,
    const ClassifyThresholds& thresholds);

// Stage 2 entry: hard labels from the Stage 1 weights, trimmed center
// trajectories, PCA classification, canonical geometry at the canonical
// frame, and logits carried over so softmax reproduces the Stage 1 blend
// weights.
struct InitializeResult {
  ArticulatedModel model;
  std::vector<std::string> warnings;
};
InitializeResult initialize(const TrackSet& tracks,
                            const MotionBasisSet& bases,
                            const RefineConfig& config);

// Hard-assignment forward kinematics: every point moved by its argmax
// part's joint transform at frame t.
std::vector<Eigen::Vector3d> forward_model(const ArticulatedModel& model,
                                           int t);

// Weighted squared data term at one frame, with per-point gradients with
// respect to the 3x4 per-point transform (the outer product g * [mu, 1]^T
// consumed by the assignment straight-through estimator).
struct FittingLoss {
  double loss = 0.0;
  std::vector<Eigen::Matrix<double, 3, 4>> transform_gradients;
};
FittingLoss fitting_loss(const ArticulatedModel& model, const TrackSet& tracks,
                         int t);

// Straight-through assignment gradient: the hard forward pass differentiated
// through the soft mixture sum_j p_j T_j, including the softmax temperature
// factor:
//   dL/dz_k = (p_k / tau) * sum_j <dL/dT, T_j>_F (delta_jk - p_j).
Eigen::VectorXd ste_gradient(const Eigen::Matrix<double, 3, 4>& loss_gradient,
                             const std::vector<RigidTransform>& part_transforms,
                             const Eigen::VectorXd& probabilities, double tau);

// Squared second differences of the per-frame scalars of dynamic parts,
// with analytic gradients (static parts get zero rows).
struct AccelerationLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> scalar_gradients;  // per part, per frame
};
AccelerationLoss acceleration_loss(const ArticulatedModel& model);

// Penalizes predicted displacement along the per-frame view axis, weighted
// by the per-point omega (Stage 1 static probability). Gradients are with
// respect to the per-frame scalars. Throws InvalidInputError for a non-unit
// view axis.
struct DepthStabilityLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> scalar_gradients;
};
DepthStabilityLoss depth_stability_loss(
    const ArticulatedModel& model, const TrackSet& tracks,
    const std::vector<Eigen::Vector3d>& view_axes, const Eigen::VectorXd& omega);

// Full refinement objective and its analytic gradients with respect to every
// optimized parameter group. Exposed for the finite-difference audits.
struct ObjectiveValue {
  double fitting = 0.0;
  double acceleration = 0.0;
  double depth = 0.0;
  double total = 0.0;
};
struct ModelGradients {
  Eigen::MatrixXd logits;                       // N x K
  std::vector<Eigen::Vector3d> axis;            // per part, w.r.t. raw axis
  std::vector<Eigen::Vector3d> pivot;           // per part
  std::vector<std::vector<double>> scalars;     // per part, per frame
};
ObjectiveValue evaluate_objective(const ArticulatedModel& model,
                                  const TrackSet& tracks,
                                  const RefineConfig& config,
                                  const Eigen::VectorXd& omega,
                                  ModelGradients* grads);

// First-order refinement of logits, axes, pivots, and scalars under the
// combined objective (Adam accumulators, decoupled per-group learning
// rates). The canonical-frame scalar stays pinned at zero, axes are
// renormalized after every step, joint kinds never change, and prismatic
// pivots are frozen. Throws DivergenceError when the loss exceeds
// divergence_factor times its initial value.
struct RefineResult {
  ArticulatedModel model;
  std::vector<double> loss_history;
};
RefineResult refine(const ArticulatedModel& model, const TrackSet& tracks,
                    const RefineConfig& config);

}  // namespace artikin
