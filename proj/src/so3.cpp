#include "desc/so3.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "desc/error.hpp"

namespace desc {

namespace {

constexpr double kPi = std::numbers::pi;

// Beyond this angle the standard log formula loses the axis to roundoff.
constexpr double kNearPi = kPi - 1e-6;
constexpr double kCutLocus = kPi - 1e-9;

}  // namespace

Rotation::Rotation(const Mat3& m) : m_(m) {
  if (!is_rotation(m)) {
    throw InputError("matrix is not a rotation (R^T R != I or det != +1)");
  }
}

Rotation Rotation::about_axis(const Vec3& axis, double angle) {
  return so3_exp(axis.normalized() * angle);
}

double Rotation::angle() const { return rotation_angle(m_); }

bool Rotation::is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  if ((m.transpose() * m - Mat3::Identity()).norm() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

double rotation_angle(const Mat3& m) {
  const double sin_part = 0.5 * vee(m - m.transpose()).norm();
  const double cos_part = 0.5 * (m.trace() - 1.0);
  return std::atan2(sin_part, cos_part);
}

double angular_distance(const Rotation& a, const Rotation& b) {
  // Entries of a b^T summed in a fixed order, so swapping a and b yields the
  // exact transpose and the distance is bitwise symmetric. atan2 never leaves
  // [0, pi]; no clamping of the trace is needed.
  const Mat3& x = a.matrix();
  const Mat3& y = b.matrix();
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = x(r, 0) * y(c, 0) + x(r, 1) * y(c, 1) + x(r, 2) * y(c, 2);
  return rotation_angle(m) / kPi;
}

Rotation so3_exp(const TangentVector& v) {
  const double theta = v.norm();
  const Mat3 k = skew(v);
  if (theta < 1e-8) {
    return Rotation::from_matrix_unchecked(Mat3::Identity() + k + 0.5 * k * k);
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Rotation::from_matrix_unchecked(Mat3::Identity() + a * k + b * k * k);
}

LogResult so3_log_checked(const Rotation& r) {
  const Mat3& m = r.matrix();
  const double theta = rotation_angle(m);
  const Vec3 w = 0.5 * vee(m - m.transpose());  // sin(theta) * axis

  if (theta < 1e-8) {
    return {w, false};
  }
  if (theta < kNearPi) {
    return {w * (theta / std::sin(theta)), false};
  }

  // (M + M^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T
  const Mat3 b = 0.5 * (m + m.transpose()) - std::cos(theta) * Mat3::Identity();
  int col = 0;
  b.diagonal().maxCoeff(&col);
  Vec3 axis = b.col(col).normalized();

  bool flagged = theta >= kCutLocus;
  if (w.norm() > 1e-12 && !flagged) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    int big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis[big] < 0.0) axis = -axis;
    flagged = true;
  }
  return {axis * theta, flagged};
}

TangentVector so3_log(const Rotation& r) { return so3_log_checked(r).v; }

Rotation project_to_so3(const Mat3& m) {
  if (!m.allFinite()) {
    throw DegenerateProjectionError("cannot project non-finite matrix to SO(3)");
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv[0] <= 0.0 || sv[1] <= 1e-12 * sv[0]) {
    throw DegenerateProjectionError("cannot project matrix of rank <= 1 to SO(3)");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rotation::from_matrix_unchecked(u * d * v.transpose());
}

Rotation sample_haar(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q[i] = normal(rng);
  } while (q.norm() < 1e-12);
  q.normalize();
  const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  return Rotation::from_matrix_unchecked(quat.toRotationMatrix());
}

Rotation wigner_perturb(const Rotation& r, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw InputError("noise level must be >= 0");
  if (sigma == 0.0) return r;
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat3 w;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = normal(rng);
  return project_to_so3(r.matrix() + sigma * w);
}

}  // namespace desc
