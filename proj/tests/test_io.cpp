#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "z2eigen/checkpoint.hpp"
#include "z2eigen/cli.hpp"
#include "z2eigen/exporters.hpp"
#include "z2eigen/presets.hpp"
#include "z2eigen/runconfig.hpp"

using namespace z2eigen;
using namespace z2t;

TEST_SUITE_BEGIN("io");

namespace {

std::filesystem::path tmp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "z2eigen_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TwoValuedNet make_net(std::uint64_t seed) {
  Rng rng(seed);
  LayerSpec spec;
  spec.widths = {2, 8, 8, 1};
  return TwoValuedNet::create(tetrahedron_config(), spec, rng, 5.1);
}

}  // namespace

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
  TwoValuedNet net = make_net(3);
  AdamWState opt(net.pack().size());
  opt.t = 17;
  opt.m[5] = 0.25;
  opt.v[9] = 1.5e-9;
  const auto p1 = tmp_dir() / "a.z2e";
  const auto p2 = tmp_dir() / "b.z2e";
  Checkpoint::snapshot(net, &opt, "some rng state 123", 41).save(p1.string());
  Checkpoint ck = Checkpoint::load(p1.string());
  ck.save(p2.string());
  CHECK(slurp(p1) == slurp(p2));
  CHECK(ck.epoch == 41);
  CHECK(ck.opt.t == 17);
  CHECK(ck.rng_state == "some rng state 123");
}

TEST_CASE("checkpoint restores a net that evaluates bit-exactly") {
  TwoValuedNet net = make_net(4);
  const auto p = tmp_dir() / "c.z2e";
  Checkpoint::snapshot(net, nullptr, "", -1).save(p.string());
  TwoValuedNet back = Checkpoint::load(p.string()).restore_net();
  CHECK(back.lambda == net.lambda);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const SpherePoint x = random_point_off(rng, net.graph, 1e-3, 1e-3);
    const Jet2 a = eval_jet(net, x);
    const Jet2 b = eval_jet(back, x);
    CHECK(a.v == b.v);
    CHECK(a.d2[0] == b.d2[0]);
  }
}

TEST_CASE("checkpoint with mismatched networks fails cleanly") {
  TwoValuedNet net = make_net(6);
  Checkpoint ck = Checkpoint::snapshot(net, nullptr, "", -1);
  ck.nets.pop_back();  // now 4 nets for a 5-chart atlas
  const auto p = tmp_dir() / "d.z2e";
  ck.save(p.string());
  CHECK_THROWS_AS(Checkpoint::load(p.string()).restore_net(), CheckpointMismatch);
}

TEST_CASE("run config parse -> serialize is a fixpoint and rejects unknown keys") {
  RunConfig rc = RunConfig::defaults_for("tetrahedron");
  rc.train.seed = 99;
  rc.train.epochs = 123;
  rc.out_dir = "some/dir";
  const std::string text = rc.serialize();
  RunConfig parsed = RunConfig::parse(text);
  CHECK(parsed.serialize() == text);
  CHECK(parsed.train.seed == 99);
  CHECK(parsed.train.epochs == 123);
  CHECK_THROWS_AS(RunConfig::parse("preset = antipodal\nbogus_key = 3\n"), ConfigParseError);
  CHECK_THROWS_AS(RunConfig::parse("this is not a config\n"), ConfigParseError);
}

TEST_CASE("plot grid of the zero net is zero away from the mask") {
  TwoValuedNet net = make_net(7);
  for (MlpParams& p : net.nets) std::fill(p.data.begin(), p.data.end(), 0.0);
  const auto path = tmp_dir() / "grid.tsv";
  export_plot_grid(net, 16, 32, path.string());
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "phi\ttheta\tu\tresidual\tweighted_residual");
  int rows = 0, masked = 0;
  double phi, theta;
  std::string u, resid, wresid;
  while (is >> phi >> theta >> u >> resid >> wresid) {
    ++rows;
    if (u == "nan") {
      ++masked;
    } else {
      CHECK(std::stod(u) == 0.0);
      CHECK(std::stod(resid) == 0.0);
    }
  }
  CHECK(rows == 16 * 32);
  CHECK(masked > 0);
  CHECK(masked < rows / 4);
}

TEST_CASE("plot grid shows the sign flip across the south cut") {
  Rng rng(8);
  LayerSpec spec;
  spec.widths = {2, 8, 8, 1};
  TwoValuedNet net = TwoValuedNet::create(antipodal_config(), spec, rng, 3.75);
  const auto path = tmp_dir() / "grid2.tsv";
  export_plot_grid(net, 64, 128, path.string());
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  std::vector<std::vector<double>> u(64, std::vector<double>(128, 0.0));
  std::vector<std::vector<bool>> ok(64, std::vector<bool>(128, false));
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 128; ++j) {
      std::getline(is, line);
      std::istringstream ls(line);
      std::string phi, theta, uu, r, wr;
      ls >> phi >> theta >> uu >> r >> wr;
      if (uu != "nan") {
        u[i][j] = std::stod(uu);
        ok[i][j] = true;
      }
    }
  }
  int flips = 0, considered = 0;
  for (int i = 4; i < 60; ++i) {
    if (!ok[i][0] || !ok[i][127]) continue;
    if (std::abs(u[i][0]) < 0.02) continue;
    ++considered;
    if (u[i][0] * u[i][127] < 0.0) ++flips;
  }
  CHECK(considered > 10);
  CHECK(flips == considered);
}

TEST_CASE("icosphere mesh export") {
  TwoValuedNet net = make_net(9);
  for (MlpParams& p : net.nets) std::fill(p.data.begin(), p.data.end(), 0.0);
  const auto path = tmp_dir() / "mesh0.txt";
  MeshStats st = export_mesh(net, 0, path.string());
  CHECK(st.vertices == 12);
  CHECK(st.triangles == 20);
  MeshStats st2 = export_mesh(net, 2, path.string());
  CHECK(st2.triangles == 20 * 16);
  // vertices are on the unit sphere, zero net gives zero attributes
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);  // comment
  std::size_t nv, nt;
  is >> nv >> nt;
  for (std::size_t v = 0; v < nv; ++v) {
    double x, y, z, uval;
    int sheet;
    is >> x >> y >> z >> uval >> sheet;
    CHECK(std::abs(std::sqrt(x * x + y * y + z * z) - 1.0) < 1e-12);
    CHECK(uval == 0.0);
    CHECK((sheet == 1 || sheet == -1 || sheet == 0));
  }
  int straddling = 0;
  for (std::size_t t = 0; t < nt; ++t) {
    std::string tag;
    int i, j, k, flag;
    is >> tag >> i >> j >> k >> flag;
    CHECK(tag == "t");
    straddling += flag;
  }
  CHECK(straddling > 0);
}

TEST_CASE("cli: tiny training run writes config, metrics and checkpoint") {
  const auto dir = tmp_dir() / "run1";
  std::filesystem::remove_all(dir);
  int rc = run_cli({"train", "--preset", "antipodal", "--epochs", "2", "--points", "2048",
                    "--batches", "1", "--seed", "5", "--out", dir.string()});
  CHECK(rc == 0);
  CHECK(std::filesystem::exists(dir / "config.cfg"));
  CHECK(std::filesystem::exists(dir / "metrics.tsv"));
  CHECK(std::filesystem::exists(dir / "checkpoint.z2e"));

  // eval prints metrics for the stored checkpoint
  CHECK(run_cli({"eval", "--checkpoint", (dir / "checkpoint.z2e").string(), "--points", "512"}) ==
        0);
  // plot on the trained checkpoint
  const auto grid = dir / "grid.tsv";
  CHECK(run_cli({"plot", "--checkpoint", (dir / "checkpoint.z2e").string(), "--resolution",
                 "16x32", "--out", grid.string()}) == 0);
  CHECK(std::filesystem::exists(grid));
  // diagnose
  const auto diag = dir / "diag.txt";
  CHECK(run_cli({"diagnose", "--checkpoint", (dir / "checkpoint.z2e").string(), "--out",
                 diag.string()}) == 0);
  CHECK(std::filesystem::exists(diag));
}

TEST_CASE("cli: usage errors exit with code 1") {
  CHECK(run_cli({"bogus"}) == 1);
  CHECK(run_cli({"eval"}) == 1);  // missing required --checkpoint
  CHECK(run_cli({"plot", "--checkpoint", "/nonexistent.z2e", "--resolution", "zz"}) == 1);
}

TEST_CASE("environment seed override") {
  RunConfig rc = RunConfig::defaults_for("antipodal");
  rc.train.seed = 1;
  setenv("Z2_SEED", "424242", 1);
  rc.apply_env_seed();
  unsetenv("Z2_SEED");
  CHECK(rc.train.seed == 424242);
}

TEST_SUITE_END();
