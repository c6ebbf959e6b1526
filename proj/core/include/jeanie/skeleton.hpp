#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace jeanie {

using Joint3D = Eigen::Vector3d;

/// Frames x joints x 3 coordinates, stored frame-major with xyz innermost so
/// that a run of consecutive frames is one contiguous slice.
class SkeletonSequence {
 public:
  SkeletonSequence() = default;
  SkeletonSequence(std::size_t frames, std::size_t joints, std::size_t hip_index,
                   std::optional<double> fps = std::nullopt);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t joints() const noexcept { return joints_; }
  std::size_t hip_index() const noexcept { return hip_index_; }
  std::optional<double> fps() const noexcept { return fps_; }

  Eigen::Map<Joint3D> joint(std::size_t frame, std::size_t j) {
    return Eigen::Map<Joint3D>(coords_.data() + offset(frame, j));
  }
  Eigen::Map<const Joint3D> joint(std::size_t frame, std::size_t j) const {
    return Eigen::Map<const Joint3D>(coords_.data() + offset(frame, j));
  }

  std::span<const double> frame_values(std::size_t frame) const {
    return {coords_.data() + offset(frame, 0), joints_ * 3};
  }

  std::span<double> values() noexcept { return coords_; }
  std::span<const double> values() const noexcept { return coords_; }

  /// Throws a layout error if the hip index is out of range or a coordinate
  /// is not finite.
  void validate() const;

  friend bool operator==(const SkeletonSequence&, const SkeletonSequence&) = default;

 private:
  std::size_t offset(std::size_t frame, std::size_t j) const { return (frame * joints_ + j) * 3; }

  std::size_t frames_ = 0;
  std::size_t joints_ = 0;
  std::size_t hip_index_ = 0;
  std::optional<double> fps_;
  std::vector<double> coords_;
};

}  // namespace jeanie
