#include "artikin/geom.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "artikin/errors.hpp"

namespace artikin {

Eigen::Matrix<double, 3, 4> RigidTransform::matrix3x4() const {
  Eigen::Matrix<double, 3, 4> m;
  m.leftCols<3>() = rotation;
  m.col(3) = translation;
  return m;
}

bool RigidTransform::is_valid(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if (((gram - Eigen::Matrix3d::Identity()).array().abs() > tol).any())
    return false;
  return std::abs(rotation.determinant() - 1.0) <= tol &&
         translation.allFinite();
}

UnitAxis::UnitAxis(const Eigen::Vector3d& raw) {
  // Epsilon-guarded division keeps the zero vector finite; the second
  // normalization pins |direction| = 1 to machine precision.
  direction_ = raw / (raw.norm() + kNormEps);
  const double n = direction_.norm();
  if (n > 0.0) direction_ /= n;
  else direction_ = Eigen::Vector3d::UnitZ();
}

UnitAxis UnitAxis::flipped() const {
  UnitAxis a;
  a.direction_ = -direction_;
  return a;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& a) {
  Eigen::Matrix3d m;
  m << 0, -a.z(), a.y(),
       a.z(), 0, -a.x(),
       -a.y(), a.x(), 0;
  return m;
}

Eigen::Matrix3d rodrigues(const UnitAxis& axis, double angle) {
  if (!std::isfinite(angle))
    throw InvalidInputError("rodrigues: non-finite angle");
  const Eigen::Matrix3d k = skew(axis.direction());
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
         (1.0 - std::cos(angle)) * (k * k);
}

Eigen::Matrix3d rodrigues_dtheta(const UnitAxis& axis, double angle) {
  const Eigen::Matrix3d k = skew(axis.direction());
  return std::cos(angle) * k + std::sin(angle) * (k * k);
}

RigidTransform revolute_transform(const UnitAxis& axis,
                                  const Eigen::Vector3d& pivot, double angle) {
  RigidTransform t;
  t.rotation = rodrigues(axis, angle);
  t.translation = pivot - t.rotation * pivot;
  return t;
}

RigidTransform prismatic_transform(const UnitAxis& axis, double displacement) {
  RigidTransform t;
  t.translation = displacement * axis.direction();
  return t;
}

RigidTransform weighted_procrustes(const std::vector<Eigen::Vector3d>& src,
                                   const std::vector<Eigen::Vector3d>& dst,
                                   const std::vector<double>& weights) {
  if (src.size() != dst.size() || src.size() != weights.size())
    throw InvalidInputError("weighted_procrustes: size mismatch");

  double total = 0.0;
  int effective = 0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw InvalidInputError("weighted_procrustes: negative or non-finite weight");
    if (w > 0.0) ++effective;
    total += w;
  }
  if (effective < 3 || total <= 0.0)
    throw DegenerateGeometryError(
        "weighted_procrustes: fewer than 3 effective points", 0);

  Eigen::Vector3d src_centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_centroid = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    src_centroid += weights[i] * src[i];
    dst_centroid += weights[i] * dst[i];
  }
  src_centroid /= total;
  dst_centroid /= total;

  // Weighted cross-covariance H = sum_i w_i (src_i - cs)(dst_i - cd)^T.
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < src.size(); ++i)
    h += weights[i] * (src[i] - src_centroid) * (dst[i] - dst_centroid).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < 3; ++i)
    if (sigma[i] > 1e-9 * sigma[0]) ++rank;
  if (sigma[0] <= 0.0) rank = 0;
  // Coplanar sets (rank 2) are fine; collinear ones leave the rotation about
  // the line undetermined.
  if (rank < 2)
    throw DegenerateGeometryError(
        "weighted_procrustes: rank-deficient covariance (collinear points)",
        rank);

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0)
    d(2, 2) = -1.0;

  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = dst_centroid - t.rotation * src_centroid;
  return t;
}

RigidTransform project_to_se3(const Eigen::Matrix3d& blend_rotation,
                              const Eigen::Vector3d& blend_translation) {
  if (!blend_rotation.allFinite())
    throw InvalidInputError("project_to_se3: non-finite rotation blend");
  if (blend_rotation.norm() == 0.0)
    throw DegenerateGeometryError("project_to_se3: zero rotation blend", 0);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      blend_rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    d(2, 2) = -1.0;

  RigidTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  t.translation = blend_translation;
  return t;
}

PcaResult pca(const std::vector<Eigen::Vector3d>& points) {
  if (points.size() < 3)
    throw InvalidInputError("pca: need at least 3 points");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d c = p - centroid;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);

  PcaResult r;
  r.centroid = centroid;
  // SelfAdjointEigenSolver sorts ascending; report descending.
  for (int i = 0; i < 3; ++i) {
    r.eigenvalues[i] = std::max(0.0, eig.eigenvalues()[2 - i]);
    r.eigenvectors.col(i) = eig.eigenvectors().col(2 - i);
  }
  return r;
}

}  // namespace artikin
