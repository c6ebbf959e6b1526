#pragma once

#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "jeanie/skeleton.hpp"

namespace jeanie::geometry {

enum class Axis { X, Y, Z };

struct RotationSpec {
  Axis axis = Axis::X;
  double theta = 0.0;  // radians
};

inline constexpr double deg_to_rad(double degrees) { return degrees * std::numbers::pi / 180.0; }

/// Azimuth/altitude camera-shift grid. K = 2*eta_az + 1 cells along azimuth,
/// K' = 2*eta_alt + 1 along altitude; cell (eta_az, eta_alt) is the identity view.
struct CameraShiftGrid {
  int eta_az = 0;
  int eta_alt = 0;
  double delta_az = deg_to_rad(15.0);
  double delta_alt = deg_to_rad(15.0);

  int azimuth_cells() const { return 2 * eta_az + 1; }
  int altitude_cells() const { return 2 * eta_alt + 1; }
  double azimuth_offset(int i) const { return (i - eta_az) * delta_az; }
  double altitude_offset(int j) const { return (j - eta_alt) * delta_alt; }

  void validate() const;
};

struct StereoCamera {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Matrix3d M_left = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d M_right = Eigen::Matrix3d::Identity();

  /// Checks R is a proper rotation (1e-9) and both intrinsics are invertible.
  void validate() const;
};

enum class ViewMode { Euler, CamVPC };

/// How grid offsets become transformed sequences. In CamVPC mode the camera
/// orbits a pivot at (0, camera_height, camera_distance) in the sequence frame.
struct ViewOptions {
  ViewMode mode = ViewMode::Euler;
  double camera_distance = 3.0;
  double camera_height = 0.0;
};

Eigen::Matrix3d euler_matrix(const RotationSpec& spec);

/// Hip-centred rotation by Rx(theta_x) * Ry(theta_y), frame by frame.
SkeletonSequence rotate_sequence(const SkeletonSequence& seq, double theta_x, double theta_y);

/// Skew-symmetric S with rows (0,-tz,ty), (tz,0,-tx), (-ty,tx,0).
Eigen::Matrix3d skew_matrix(const Eigen::Vector3d& t);

Eigen::Matrix3d essential_matrix(const StereoCamera& cam);
Eigen::Matrix3d fundamental_matrix(const StereoCamera& cam);

/// p_r = R (p_l - t).
inline Eigen::Vector3d to_right_camera(const StereoCamera& cam, const Eigen::Vector3d& p_left) {
  return cam.R * (p_left - cam.t);
}

/// |p*_r^T F p*_l| for the joint p_l and its rigidly transformed counterpart,
/// both mapped to homogeneous pixel coordinates through the intrinsics.
double epipolar_residual(const StereoCamera& cam, const Eigen::Matrix3d& F,
                         const Eigen::Vector3d& p_left);

SkeletonSequence simulate_view(const SkeletonSequence& seq, const StereoCamera& cam);

/// Camera orbiting the configured pivot by azimuth (about y) then altitude (about x).
StereoCamera camera_for_offset(double azimuth, double altitude, const ViewOptions& opts);

class ViewGrid {
 public:
  ViewGrid(int azimuth_cells, int altitude_cells, std::vector<SkeletonSequence> cells)
      : k_(azimuth_cells), k_prime_(altitude_cells), cells_(std::move(cells)) {}

  int azimuth_cells() const { return k_; }
  int altitude_cells() const { return k_prime_; }
  const SkeletonSequence& at(int i, int j) const {
    return cells_[static_cast<std::size_t>(i * k_prime_ + j)];
  }

 private:
  int k_;
  int k_prime_;
  std::vector<SkeletonSequence> cells_;
};

ViewGrid make_view_grid(const SkeletonSequence& seq, const CameraShiftGrid& grid,
                        const ViewOptions& opts);

}  // namespace jeanie::geometry
