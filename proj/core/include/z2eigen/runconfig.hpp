#pragma once
#include <string>

#include "z2eigen/loss.hpp"

namespace z2eigen {

// Flat key = value run description. Parsing rejects unknown keys;
// serialize() emits every key in a fixed order so parse -> serialize is a
// fixpoint.
struct RunConfig {
  std::string preset = "antipodal";
  TrainConfig train;
  std::string out_dir = "out";
  int plot_rows = 256;
  int plot_cols = 512;
  int mesh_subdivisions = 4;

  static RunConfig defaults_for(const std::string& preset_name);
  static RunConfig parse(const std::string& text);
  std::string serialize() const;

  // Z2_SEED, when set, overrides the configured seed.
  void apply_env_seed();
};

}  // namespace z2eigen
