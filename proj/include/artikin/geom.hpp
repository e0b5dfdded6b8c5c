#pragma once

#include <Eigen/Core>

#include <vector>

namespace artikin {

// An SE(3) element: x -> rotation * x + translation.
// rotation is orthonormal with det +1 (checked by is_valid / tests, not
// enforced per call).
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  // Composition: (a * b)(x) = a(b(x)).
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation,
            rotation * other.translation + translation};
  }

  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  // 3x4 matrix [R | t]; the layout used for the Frobenius inner products in
  // the assignment gradients.
  Eigen::Matrix<double, 3, 4> matrix3x4() const;

  bool is_valid(double tol = 1e-9) const;

  static RigidTransform identity() { return {}; }
};

// A unit-length direction. Construction normalizes with an epsilon guard so
// near-zero inputs stay finite, then renormalizes exactly.
class UnitAxis {
 public:
  static constexpr double kNormEps = 1e-7;

  UnitAxis() : direction_(Eigen::Vector3d::UnitZ()) {}
  explicit UnitAxis(const Eigen::Vector3d& raw);

  const Eigen::Vector3d& direction() const { return direction_; }
  UnitAxis flipped() const;

 private:
  Eigen::Vector3d direction_;
};

// Eigen-decomposition of a 3x3 covariance: eigenvalues descending and
// clamped non-negative, eigenvectors as matrix columns.
struct PcaResult {
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();

  Eigen::Vector3d component(int i) const { return eigenvectors.col(i); }
};

// Skew-symmetric cross-product matrix [a]x.
Eigen::Matrix3d skew(const Eigen::Vector3d& a);

// Rotation by `angle` radians about `axis`:
//   R = I + sin(theta) [a]x + (1 - cos(theta)) [a]x^2.
// Throws InvalidInputError for a non-finite angle.
Eigen::Matrix3d rodrigues(const UnitAxis& axis, double angle);

// Derivative of rodrigues with respect to the angle.
Eigen::Matrix3d rodrigues_dtheta(const UnitAxis& axis, double angle);

// Rotation about an axis through `pivot`; the pivot is a fixed point:
//   t = (I - R) * pivot.
RigidTransform revolute_transform(const UnitAxis& axis,
                                  const Eigen::Vector3d& pivot, double angle);

// Pure translation of `displacement` along `axis`.
RigidTransform prismatic_transform(const UnitAxis& axis, double displacement);

// Weighted least-squares rigid alignment: minimizes sum_i w_i |T(src_i) -
// dst_i|^2 over SE(3). SVD (Kabsch) solution; a det = -1 rotation branch is
// corrected by flipping the smallest singular direction.
// Throws DegenerateGeometryError (carrying the covariance rank) when fewer
// than 3 points have positive weight or the points are collinear.
RigidTransform weighted_procrustes(const std::vector<Eigen::Vector3d>& src,
                                   const std::vector<Eigen::Vector3d>& dst,
                                   const std::vector<double>& weights);

// Projects a blended (non-orthonormal) rotation onto SO(3) in the Frobenius
// sense; the translation passes through unchanged. Throws
// DegenerateGeometryError for a zero matrix.
RigidTransform project_to_se3(const Eigen::Matrix3d& blend_rotation,
                              const Eigen::Vector3d& blend_translation);

// PCA of a 3D point set: covariance (1/N normalization) of centered points.
// Throws InvalidInputError for fewer than 3 points.
PcaResult pca(const std::vector<Eigen::Vector3d>& points);

}  // namespace artikin
