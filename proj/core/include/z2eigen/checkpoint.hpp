#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "z2eigen/loss.hpp"

namespace z2eigen {

// Binary training snapshot. Fixed little-endian layout with a 16-byte
// magic/version header; save -> load -> save is byte-identical.
struct Checkpoint {
  std::uint32_t version = 1;
  BranchConfiguration config;
  bool lambda_trainable = true;
  double lambda = 0.0;
  std::vector<MlpParams> nets;
  bool has_optimizer = false;
  AdamWState opt;
  std::string rng_state;  // textual mt19937_64 state of the shuffle stream
  std::int64_t epoch = -1;

  static Checkpoint snapshot(const TwoValuedNet& net, const AdamWState* opt_state,
                             const std::string& rng_state, std::int64_t epoch);

  // Rebuilds graph and atlas; throws CheckpointMismatch if the stored
  // networks do not line up with the atlas the configuration produces.
  TwoValuedNet restore_net() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace z2eigen
