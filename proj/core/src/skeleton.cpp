#include "jeanie/skeleton.hpp"

#include <cmath>
#include <string>

#include "jeanie/error.hpp"

namespace jeanie {

SkeletonSequence::SkeletonSequence(std::size_t frames, std::size_t joints, std::size_t hip_index,
                                   std::optional<double> fps)
    : frames_(frames), joints_(joints), hip_index_(hip_index), fps_(fps),
      coords_(frames * joints * 3, 0.0) {}

void SkeletonSequence::validate() const {
  require(joints_ > 0, ErrorKind::Layout, "skeleton has no joints");
  require(hip_index_ < joints_, ErrorKind::Layout,
          "hip index " + std::to_string(hip_index_) + " out of range for " +
              std::to_string(joints_) + " joints");
  for (double v : coords_) {
    require(std::isfinite(v), ErrorKind::Layout, "non-finite joint coordinate");
  }
}

}  // namespace jeanie
