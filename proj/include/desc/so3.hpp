#pragma once

#include <Eigen/Core>
#include <random>

namespace desc {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Axis-angle coordinates of an element of so(3), in radians.
using TangentVector = Eigen::Vector3d;

/// Seeded random source used throughout the library.
using Rng = std::mt19937_64;

/// An element of SO(3) stored as a 3x3 rotation matrix.
///
/// The checked constructor rejects matrices that are not orthonormal with
/// determinant +1 (tolerance 1e-10 on the Frobenius norm of R^T R - I).
/// Results of the library's own operations are built through
/// `from_matrix_unchecked` since they are rotations by construction.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }
  static Rotation from_matrix_unchecked(const Mat3& m) {
    Rotation r;
    r.m_ = m;
    return r;
  }
  /// Rotation by `angle` radians about a (not necessarily unit) axis.
  static Rotation about_axis(const Vec3& axis, double angle);

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Rotation transpose() const { return from_matrix_unchecked(m_.transpose()); }
  Rotation inverse() const { return transpose(); }
  Rotation operator*(const Rotation& other) const { return from_matrix_unchecked(m_ * other.m_); }

  /// Rotation angle in [0, pi].
  double angle() const;

  static bool is_rotation(const Mat3& m, double tol = 1e-10);

 private:
  Mat3 m_;
};

Mat3 skew(const Vec3& v);
Vec3 vee(const Mat3& m);

/// Rotation angle of a (near) rotation matrix, computed as
/// atan2(|vee(M - M^T)| / 2, (tr M - 1) / 2) so that angles near 0 keep
/// full relative precision.
double rotation_angle(const Mat3& m);

/// Bi-invariant geodesic distance scaled to [0, 1]: angle(a b^T) / pi.
double angular_distance(const Rotation& a, const Rotation& b);

/// Rodrigues' formula.
Rotation so3_exp(const TangentVector& v);

struct LogResult {
  TangentVector v;
  /// Set when the rotation angle is (numerically) pi and the axis sign was
  /// chosen by convention.
  bool at_cut_locus = false;
};

/// Principal logarithm. At angle pi the axis sign is fixed so that its
/// largest-magnitude component is positive, and the result is flagged.
LogResult so3_log_checked(const Rotation& r);
TangentVector so3_log(const Rotation& r);

/// Nearest rotation in Frobenius norm, U diag(1, 1, det(U V^T)) V^T.
/// Throws DegenerateProjectionError for rank <= 1 or non-finite input.
Rotation project_to_so3(const Mat3& m);

/// Haar-distributed rotation from a uniformly random unit quaternion.
Rotation sample_haar(Rng& rng);

/// project_to_so3(r + sigma W) with W a 3x3 matrix of i.i.d. N(0, 1)
/// entries. sigma == 0 returns r unchanged.
Rotation wigner_perturb(const Rotation& r, double sigma, Rng& rng);

}  // namespace desc
