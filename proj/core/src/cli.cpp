#include "z2eigen/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "z2eigen/checkpoint.hpp"
#include "z2eigen/exporters.hpp"
#include "z2eigen/presets.hpp"
#include "z2eigen/runconfig.hpp"

namespace z2eigen {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cmd_train(const std::string& preset, const std::string& config_file, const std::string& out_dir,
              int epochs, long long points, int batches, long long seed) {
  RunConfig rc;
  if (!config_file.empty()) {
    rc = RunConfig::parse(read_file(config_file));
    if (!preset.empty() && preset != rc.preset)
      throw ConfigParseError("--preset " + preset + " conflicts with the config file's preset " +
                             rc.preset);
  } else {
    rc = RunConfig::defaults_for(preset.empty() ? "antipodal" : preset);
  }
  if (!out_dir.empty()) rc.out_dir = out_dir;
  if (epochs > 0) {
    rc.train.epochs = epochs;
    rc.train.restart_period = std::min(rc.train.restart_period, epochs);
  }
  if (points > 0) rc.train.train_points = static_cast<std::size_t>(points);
  if (batches > 0) rc.train.num_batches = batches;
  if (seed >= 0) rc.train.seed = static_cast<std::uint64_t>(seed);
  rc.apply_env_seed();

  Preset p = preset_by_name(rc.preset);
  std::filesystem::create_directories(rc.out_dir);
  {
    std::ofstream cfg(rc.out_dir + "/config.cfg", std::ios::trunc);
    cfg << rc.serialize();
  }
  std::ofstream metrics(rc.out_dir + "/metrics.tsv", std::ios::app);
  metrics << "epoch\tlr\ttrain_total\tl2\tc0\tnorm\tpenalty\teig\tlambda\tval_rmse\tval_wc0\t"
             "val_sup_u\tmin_sep\n";

  TrainHooks hooks;
  hooks.on_epoch = [&metrics](const EpochMetrics& em) {
    char line[384];
    std::snprintf(line, sizeof line,
                  "%d\t%.6g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.12g\t%.9g\t%.9g\t%.9g\t%.9g\n",
                  em.epoch, em.lr, em.train_total, em.last_batch.l2, em.last_batch.c0,
                  em.last_batch.norm, em.last_batch.penalty, em.last_batch.eig, em.lambda,
                  em.val_rmse, em.val_wc0, em.val_sup_u, em.min_sep_azimuthal);
    metrics << line;
    metrics.flush();
    if (em.epoch % 10 == 0) {
      std::printf("epoch %5d  lr %.5f  loss %.6f  val_rmse %.6f  lambda %.6f\n", em.epoch, em.lr,
                  em.train_total, em.val_rmse, em.lambda);
      std::fflush(stdout);
    }
  };
  const std::string ckpt_path = rc.out_dir + "/checkpoint.z2e";
  hooks.on_checkpoint = [&ckpt_path](int epoch, const TwoValuedNet& net, const AdamWState& opt,
                                     const std::string& rng_state) {
    Checkpoint::snapshot(net, &opt, rng_state, epoch).save(ckpt_path);
  };

  TrainResult result = train(p.config, rc.train, hooks);
  Checkpoint::snapshot(result.net, nullptr, "", result.history.empty()
                                                    ? -1
                                                    : result.history.back().epoch)
      .save(ckpt_path);
  std::printf("final: lambda %.6f  test_rmse %.6f  test_wc0 %.6f  sup_u %.6f\n",
              result.test_metrics.lambda, result.test_metrics.rmse_residual,
              result.test_metrics.weighted_c0_residual, result.test_metrics.sup_u);
  if (result.aborted) {
    std::fprintf(stderr, "training aborted: %s (last good checkpoint kept)\n",
                 result.abort_reason.c_str());
    return 2;
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, long long seed, long long points) {
  TwoValuedNet net = Checkpoint::load(ckpt_path).restore_net();
  Rng rng = Rng::substream(seed >= 0 ? static_cast<std::uint64_t>(seed) : 1, 3);
  std::vector<SpherePoint> test =
      sample_sphere(rng, points > 0 ? static_cast<std::size_t>(points) : 16384, net.graph, 0.02);
  Metrics m = evaluate(net, test);
  std::printf("lambda %.6f\nrmse_residual %.6g\nweighted_c0_residual %.6g\nsup_u %.6g\n", m.lambda,
              m.rmse_residual, m.weighted_c0_residual, m.sup_u);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"search for 2-valued eigenfunctions of the Laplacian on the sphere"};
  app.require_subcommand(1);

  std::string preset, config_file, out_dir = "out", ckpt, resolution = "256x512", out_file;
  int epochs = -1, batches = -1, subdivisions = 4;
  long long points = -1, seed = -1;

  CLI::App* tr = app.add_subcommand("train", "train a preset");
  tr->add_option("--preset", preset, "antipodal | tetrahedron | cube | free");
  tr->add_option("--config", config_file, "key = value run configuration file");
  tr->add_option("--out", out_dir, "output directory");
  tr->add_option("--epochs", epochs, "override epoch count");
  tr->add_option("--points", points, "override training-set size");
  tr->add_option("--batches", batches, "override mini-batch count");
  tr->add_option("--seed", seed, "override rng seed");

  CLI::App* ev = app.add_subcommand("eval", "metrics of a checkpoint on a fresh test set");
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--seed", seed, "test-set seed");
  ev->add_option("--points", points, "test-set size");

  CLI::App* pl = app.add_subcommand("plot", "export a (phi, theta) grid of u and residuals");
  pl->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  pl->add_option("--resolution", resolution, "RxC, e.g. 256x512");
  pl->add_option("--out", out_file, "output file (default grid.tsv)");

  CLI::App* me = app.add_subcommand("mesh", "export an icosphere mesh with u and sheet signs");
  me->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  me->add_option("--subdivisions", subdivisions, "icosphere subdivision level");
  me->add_option("--out", out_file, "output file (default mesh.txt)");

  CLI::App* di = app.add_subcommand("diagnose", "decay profiles and leading coefficients");
  di->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  di->add_option("--out", out_file, "output file (default diagnostics.txt)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    help << app.help();
    if (e.get_exit_code() == 0) {
      std::cout << help.str();
      return 0;
    }
    std::cerr << e.what() << "\n" << help.str();
    return 1;
  }

  try {
    if (tr->parsed())
      return cmd_train(preset, config_file, out_dir, epochs, points, batches, seed);
    if (ev->parsed()) return cmd_eval(ckpt, seed, points);
    if (pl->parsed()) {
      int rows = 0, cols = 0;
      if (std::sscanf(resolution.c_str(), "%dx%d", &rows, &cols) != 2 || rows < 2 || cols < 2) {
        std::cerr << "bad --resolution, expected RxC\n";
        return 1;
      }
      TwoValuedNet net = Checkpoint::load(ckpt).restore_net();
      export_plot_grid(net, rows, cols, out_file.empty() ? "grid.tsv" : out_file);
      return 0;
    }
    if (me->parsed()) {
      TwoValuedNet net = Checkpoint::load(ckpt).restore_net();
      MeshStats st = export_mesh(net, subdivisions, out_file.empty() ? "mesh.txt" : out_file);
      std::printf("mesh: %zu vertices, %zu triangles\n", st.vertices, st.triangles);
      return 0;
    }
    if (di->parsed()) {
      TwoValuedNet net = Checkpoint::load(ckpt).restore_net();
      export_diagnostics(net, out_file.empty() ? "diagnostics.txt" : out_file);
      return 0;
    }
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const NonFiniteGradient& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace z2eigen
