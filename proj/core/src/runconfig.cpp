#include "z2eigen/runconfig.hpp"

#include <cstdlib>
#include <map>
#include <sstream>

#include "z2eigen/presets.hpp"

namespace z2eigen {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_widths(const LayerSpec& spec) {
  std::string out;
  for (std::size_t i = 1; i + 1 < spec.widths.size(); ++i) {
    if (!out.empty()) out += ",";
    out += std::to_string(spec.widths[i]);
  }
  return out;
}

LayerSpec parse_widths(const std::string& text) {
  LayerSpec spec;
  spec.widths = {2};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    spec.widths.push_back(std::stoi(item));
  }
  spec.widths.push_back(1);
  spec.validate();
  return spec;
}

}  // namespace

RunConfig RunConfig::defaults_for(const std::string& preset_name) {
  RunConfig rc;
  Preset p = preset_by_name(preset_name);
  rc.preset = p.name;
  rc.train = p.train;
  return rc;
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "preset = " << preset << "\n";
  out << "seed = " << train.seed << "\n";
  out << "epochs = " << train.epochs << "\n";
  out << "restart_period = " << train.restart_period << "\n";
  out << "train_points = " << train.train_points << "\n";
  out << "num_batches = " << train.num_batches << "\n";
  out << "val_points = " << train.val_points << "\n";
  out << "test_points = " << train.test_points << "\n";
  out << "lr_max = " << fmt_double(train.lr_max) << "\n";
  out << "lr_min = " << fmt_double(train.lr_min) << "\n";
  out << "exclusion_radius = " << fmt_double(train.exclusion_radius) << "\n";
  out << "d0 = " << fmt_double(train.d0) << "\n";
  out << "w_l2 = " << fmt_double(train.weights.l2) << "\n";
  out << "w_c0 = " << fmt_double(train.weights.c0) << "\n";
  out << "w_norm = " << fmt_double(train.weights.norm) << "\n";
  out << "w_penalty = " << fmt_double(train.weights.penalty) << "\n";
  out << "w_eig = " << fmt_double(train.weights.eig) << "\n";
  out << "eig_enabled = " << (train.weights.eig_enabled ? 1 : 0) << "\n";
  out << "lambda_init = " << fmt_double(train.lambda_init) << "\n";
  out << "train_lambda = " << (train.train_lambda ? 1 : 0) << "\n";
  out << "hidden_widths = " << fmt_widths(train.layers) << "\n";
  out << "checkpoint_every = " << train.checkpoint_every << "\n";
  out << "out_dir = " << out_dir << "\n";
  out << "plot_rows = " << plot_rows << "\n";
  out << "plot_cols = " << plot_cols << "\n";
  out << "mesh_subdivisions = " << mesh_subdivisions << "\n";
  return out.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (blank) continue;
      throw ConfigParseError("line " + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto it = kv.find("preset");
  RunConfig rc = defaults_for(it != kv.end() ? it->second : "antipodal");
  kv.erase("preset");

  auto take = [&kv](const char* key) -> std::string {
    auto e = kv.find(key);
    if (e == kv.end()) return {};
    std::string v = e->second;
    kv.erase(e);
    return v;
  };
  auto set_u64 = [&take](const char* key, auto& dst) {
    std::string v = take(key);
    if (!v.empty()) dst = static_cast<std::decay_t<decltype(dst)>>(std::stoull(v));
  };
  auto set_int = [&take](const char* key, int& dst) {
    std::string v = take(key);
    if (!v.empty()) dst = std::stoi(v);
  };
  auto set_dbl = [&take](const char* key, double& dst) {
    std::string v = take(key);
    if (!v.empty()) dst = std::stod(v);
  };
  auto set_bool = [&take](const char* key, bool& dst) {
    std::string v = take(key);
    if (!v.empty()) dst = std::stoi(v) != 0;
  };

  set_u64("seed", rc.train.seed);
  set_int("epochs", rc.train.epochs);
  set_int("restart_period", rc.train.restart_period);
  set_u64("train_points", rc.train.train_points);
  set_int("num_batches", rc.train.num_batches);
  set_u64("val_points", rc.train.val_points);
  set_u64("test_points", rc.train.test_points);
  set_dbl("lr_max", rc.train.lr_max);
  set_dbl("lr_min", rc.train.lr_min);
  set_dbl("exclusion_radius", rc.train.exclusion_radius);
  set_dbl("d0", rc.train.d0);
  set_dbl("w_l2", rc.train.weights.l2);
  set_dbl("w_c0", rc.train.weights.c0);
  set_dbl("w_norm", rc.train.weights.norm);
  set_dbl("w_penalty", rc.train.weights.penalty);
  set_dbl("w_eig", rc.train.weights.eig);
  set_bool("eig_enabled", rc.train.weights.eig_enabled);
  set_dbl("lambda_init", rc.train.lambda_init);
  set_bool("train_lambda", rc.train.train_lambda);
  {
    std::string v = take("hidden_widths");
    if (!v.empty()) rc.train.layers = parse_widths(v);
  }
  set_int("checkpoint_every", rc.train.checkpoint_every);
  {
    std::string v = take("out_dir");
    if (!v.empty()) rc.out_dir = v;
  }
  set_int("plot_rows", rc.plot_rows);
  set_int("plot_cols", rc.plot_cols);
  set_int("mesh_subdivisions", rc.mesh_subdivisions);

  if (!kv.empty()) throw ConfigParseError("unknown key: " + kv.begin()->first);
  return rc;
}

void RunConfig::apply_env_seed() {
  if (const char* env = std::getenv("Z2_SEED")) train.seed = std::strtoull(env, nullptr, 10);
}

}  // namespace z2eigen
