#include "z2eigen/presets.hpp"

#include <cmath>

namespace z2eigen {

namespace {

BranchConfiguration make_config(const std::vector<SpherePoint>& pts,
                                const std::vector<std::uint8_t>& trainable) {
  BranchConfiguration c;
  c.points = pts;
  c.trainable = trainable;
  c.validate();
  return c;
}

}  // namespace

std::vector<std::string> preset_names() { return {"antipodal", "tetrahedron", "cube", "free"}; }

Preset preset_by_name(const std::string& name) {
  Preset p;
  p.name = name;
  TrainConfig& t = p.train;
  if (name == "antipodal") {
    p.config = make_config({SpherePoint(0.0, 0.0), SpherePoint(kPi, 0.0)}, {0, 0});
    t.lambda_init = 4.0;
    t.weights = {10.0, 1.0, 100.0, 0.0, 0.0, false};
    t.d0 = 0.3;
    t.train_points = 65536;
    t.num_batches = 32;
    t.epochs = 500;
    t.restart_period = 500;
  } else if (name == "tetrahedron") {
    const double phi = std::acos(-1.0 / 3.0);
    p.config = make_config({SpherePoint(0.0, 0.0), SpherePoint(phi, 0.0),
                            SpherePoint(phi, 2.0 * kPi / 3.0), SpherePoint(phi, 4.0 * kPi / 3.0)},
                           {0, 0, 0, 0});
    t.lambda_init = 4.0;
    t.weights = {10.0, 1.0, 100.0, 0.0, 2.0, true};
    t.d0 = 0.3;
    t.train_points = 131072;
    t.num_batches = 64;
    t.epochs = 1000;
    t.restart_period = 1000;
  } else if (name == "cube") {
    // Cube standing on a space diagonal: poles plus two rings of three,
    // offset so no ring vertex shares the south cut at theta = 0.
    const double phi_u = std::acos(1.0 / 3.0);
    const double phi_l = kPi - phi_u;
    p.config = make_config(
        {SpherePoint(0.0, 0.0), SpherePoint(phi_u, kPi / 6.0), SpherePoint(phi_u, 5.0 * kPi / 6.0),
         SpherePoint(phi_u, 3.0 * kPi / 2.0), SpherePoint(phi_l, kPi / 2.0),
         SpherePoint(phi_l, 7.0 * kPi / 6.0), SpherePoint(phi_l, 11.0 * kPi / 6.0),
         SpherePoint(kPi, 0.0)},
        {0, 0, 0, 0, 0, 0, 0, 0});
    t.lambda_init = 8.0;
    t.weights = {10.0, 1.0, 100.0, 0.0, 0.25, true};
    t.d0 = 0.3;
    t.train_points = 131072;
    t.num_batches = 64;
    t.epochs = 1000;
    t.restart_period = 1000;
  } else if (name == "free") {
    p.config = make_config({SpherePoint(0.0, 0.0), SpherePoint(1.9, 0.3), SpherePoint(1.9, 2.4),
                            SpherePoint(1.9, 4.5)},
                           {0, 1, 1, 1});
    t.lambda_init = 10.0;
    t.train_lambda = true;
    t.weights = {10.0, 1.0, 100.0, 5.0, 0.0, false};
    t.d0 = 0.8;
    t.train_points = 32768;
    t.num_batches = 16;
    t.epochs = 100;
    t.restart_period = 100;
  } else {
    throw InvalidConfiguration("unknown preset: " + name);
  }
  return p;
}

void HalfIntegerField::eval_points(std::span<const SpherePoint> pts, std::span<double> u,
                                   std::span<double> lap) const {
  // Evaluated through jets and the Laplace-Beltrami contraction, so the
  // residual against lambda = 15/4 measures the differentiation machinery,
  // not an algebraic identity.
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const Jet2 jphi = seed(0, pts[p].phi);
    const Jet2 jtheta = seed(1, pts[p].theta);
    const Jet2 s = sin(jphi);
    const Jet2 uj = s * sqrt(s) * cos(jtheta * 1.5);
    u[p] = uj.v;
    lap[p] = laplace_beltrami(uj, pts[p].phi);
  }
}

}  // namespace z2eigen
