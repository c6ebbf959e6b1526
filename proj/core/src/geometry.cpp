#include "jeanie/geometry.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "jeanie/error.hpp"

namespace jeanie::geometry {

void CameraShiftGrid::validate() const {
  require(eta_az >= 0 && eta_alt >= 0, ErrorKind::Config, "grid step counts must be nonnegative");
  require(std::isfinite(delta_az) && std::isfinite(delta_alt), ErrorKind::Config,
          "grid step sizes must be finite");
}

void StereoCamera::validate() const {
  const double orth = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  require(orth <= 1e-9 && std::abs(R.determinant() - 1.0) <= 1e-9, ErrorKind::Geometry,
          "camera rotation is not a proper rotation matrix");
  require(t.allFinite(), ErrorKind::Geometry, "camera translation is not finite");
  require(std::abs(M_left.determinant()) > 1e-12 && std::abs(M_right.determinant()) > 1e-12,
          ErrorKind::Geometry, "singular intrinsic matrix");
}

Eigen::Matrix3d euler_matrix(const RotationSpec& spec) {
  const double c = std::cos(spec.theta);
  const double s = std::sin(spec.theta);
  Eigen::Matrix3d m;
  switch (spec.axis) {
    case Axis::X:
      m << 1, 0, 0,
           0, c, s,
           0, -s, c;
      break;
    case Axis::Y:
      m << c, 0, -s,
           0, 1, 0,
           s, 0, c;
      break;
    case Axis::Z:
      m << c, s, 0,
           -s, c, 0,
           0, 0, 1;
      break;
  }
  return m;
}

SkeletonSequence rotate_sequence(const SkeletonSequence& seq, double theta_x, double theta_y) {
  require(seq.hip_index() < seq.joints(), ErrorKind::Layout, "hip index out of range");
  SkeletonSequence out = seq;
  if (theta_x == 0.0 && theta_y == 0.0) return out;

  const Eigen::Matrix3d R =
      euler_matrix({Axis::X, theta_x}) * euler_matrix({Axis::Y, theta_y});
  for (std::size_t f = 0; f < seq.frames(); ++f) {
    const Joint3D hip = seq.joint(f, seq.hip_index());
    for (std::size_t j = 0; j < seq.joints(); ++j) {
      out.joint(f, j) = hip + R * (seq.joint(f, j) - hip);
    }
  }
  return out;
}

Eigen::Matrix3d skew_matrix(const Eigen::Vector3d& t) {
  Eigen::Matrix3d S;
  S << 0, -t.z(), t.y(),
       t.z(), 0, -t.x(),
       -t.y(), t.x(), 0;
  return S;
}

Eigen::Matrix3d essential_matrix(const StereoCamera& cam) { return cam.R * skew_matrix(cam.t); }

Eigen::Matrix3d fundamental_matrix(const StereoCamera& cam) {
  require(std::abs(cam.M_left.determinant()) > 1e-12 && std::abs(cam.M_right.determinant()) > 1e-12,
          ErrorKind::Geometry, "singular intrinsic matrix");
  const Eigen::Matrix3d Ml_inv = cam.M_left.inverse();
  const Eigen::Matrix3d Mr_inv = cam.M_right.inverse();
  return Mr_inv.transpose() * essential_matrix(cam) * Ml_inv;
}

double epipolar_residual(const StereoCamera& cam, const Eigen::Matrix3d& F,
                         const Eigen::Vector3d& p_left) {
  const Eigen::Vector3d pix_left = cam.M_left * p_left;
  const Eigen::Vector3d pix_right = cam.M_right * to_right_camera(cam, p_left);
  return std::abs(pix_right.dot(F * pix_left));
}

SkeletonSequence simulate_view(const SkeletonSequence& seq, const StereoCamera& cam) {
  SkeletonSequence out = seq;
  for (std::size_t f = 0; f < seq.frames(); ++f) {
    for (std::size_t j = 0; j < seq.joints(); ++j) {
      out.joint(f, j) = to_right_camera(cam, seq.joint(f, j));
    }
  }
  return out;
}

StereoCamera camera_for_offset(double azimuth, double altitude, const ViewOptions& opts) {
  // Orbiting the pivot c by Q maps p to Q(p - c) + c, i.e. R = Q, t = c - Q^T c.
  const Eigen::Matrix3d Q =
      euler_matrix({Axis::X, altitude}) * euler_matrix({Axis::Y, azimuth});
  const Eigen::Vector3d pivot(0.0, opts.camera_height, opts.camera_distance);
  StereoCamera cam;
  cam.R = Q;
  cam.t = pivot - Q.transpose() * pivot;
  return cam;
}

ViewGrid make_view_grid(const SkeletonSequence& seq, const CameraShiftGrid& grid,
                        const ViewOptions& opts) {
  grid.validate();
  const int K = grid.azimuth_cells();
  const int Kp = grid.altitude_cells();
  std::vector<SkeletonSequence> cells;
  cells.reserve(static_cast<std::size_t>(K * Kp));
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < Kp; ++j) {
      if (i == grid.eta_az && j == grid.eta_alt) {
        cells.push_back(seq);
        continue;
      }
      const double az = grid.azimuth_offset(i);
      const double alt = grid.altitude_offset(j);
      if (opts.mode == ViewMode::Euler) {
        cells.push_back(rotate_sequence(seq, alt, az));
      } else {
        cells.push_back(simulate_view(seq, camera_for_offset(az, alt, opts)));
      }
    }
  }
  return ViewGrid(K, Kp, std::move(cells));
}

}  // namespace jeanie::geometry
