#pragma once
#include <string>
#include <vector>

#include "z2eigen/loss.hpp"

namespace z2eigen {

struct Preset {
  std::string name;
  BranchConfiguration config;
  TrainConfig train;
};

// antipodal | tetrahedron | cube | free, with desk-scale training defaults.
Preset preset_by_name(const std::string& name);
std::vector<std::string> preset_names();

// Exact candidate for the antipodal pair (n = 1): u = sin(phi)^{3/2}
// cos(3 theta / 2), an eigenfunction with lambda = 15/4 that flips sign
// across the theta = 0 cut and decays like r^{3/2} at both poles.
class HalfIntegerField final : public PointField {
 public:
  double lambda() const override { return 3.75; }
  void eval_points(std::span<const SpherePoint> pts, std::span<double> u,
                   std::span<double> lap) const override;
};

}  // namespace z2eigen
