#include "z2eigen/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace z2eigen {

namespace {

constexpr char kMagic[8] = {'Z', '2', 'E', 'V', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_i64(std::ostream& os, std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_u8(std::ostream& os, std::uint8_t v) { os.write(reinterpret_cast<const char*>(&v), 1); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::uint8_t get_u8(std::istream& is) {
  std::uint8_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 1);
  return v;
}

void put_bytes(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_bytes(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

Checkpoint Checkpoint::snapshot(const TwoValuedNet& net, const AdamWState* opt_state,
                                const std::string& rng, std::int64_t ep) {
  Checkpoint ck;
  ck.config = net.config;
  ck.lambda_trainable = net.lambda_trainable;
  ck.lambda = net.lambda;
  ck.nets = net.nets;
  if (opt_state) {
    ck.has_optimizer = true;
    ck.opt = *opt_state;
  }
  ck.rng_state = rng;
  ck.epoch = ep;
  return ck;
}

TwoValuedNet Checkpoint::restore_net() const {
  TwoValuedNet net;
  net.config = config;
  net.config.validate();
  net.graph = build_star_graph(net.config);
  net.atlas = build_atlas(net.config, net.graph);
  if (nets.size() != net.atlas.charts.size())
    throw CheckpointMismatch("checkpoint networks do not match the atlas chart count");
  for (const MlpParams& p : nets) {
    p.spec.validate();
    if (p.data.size() != p.spec.param_count())
      throw CheckpointMismatch("checkpoint parameter block size mismatch");
  }
  net.nets = nets;
  net.lambda = lambda;
  net.lambda_trainable = lambda_trainable;
  return net;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  put_u32(os, version);
  put_u32(os, 0);  // reserved

  put_u64(os, config.points.size());
  for (std::size_t j = 0; j < config.points.size(); ++j) {
    put_f64(os, config.points[j].phi);
    put_f64(os, config.points[j].theta);
    put_u8(os, config.trainable[j]);
  }
  put_u8(os, lambda_trainable ? 1 : 0);
  put_f64(os, lambda);

  put_u64(os, nets.size());
  for (const MlpParams& p : nets) {
    put_u64(os, p.spec.widths.size());
    for (int w : p.spec.widths) put_u32(os, static_cast<std::uint32_t>(w));
    put_u64(os, p.data.size());
    os.write(reinterpret_cast<const char*>(p.data.data()),
             static_cast<std::streamsize>(p.data.size() * 8));
  }

  put_u8(os, has_optimizer ? 1 : 0);
  if (has_optimizer) {
    put_f64(os, opt.hp.beta1);
    put_f64(os, opt.hp.beta2);
    put_f64(os, opt.hp.eps);
    put_f64(os, opt.hp.weight_decay);
    put_i64(os, opt.t);
    put_u64(os, opt.m.size());
    os.write(reinterpret_cast<const char*>(opt.m.data()),
             static_cast<std::streamsize>(opt.m.size() * 8));
    os.write(reinterpret_cast<const char*>(opt.v.data()),
             static_cast<std::streamsize>(opt.v.size() * 8));
  }
  put_bytes(os, rng_state);
  put_i64(os, epoch);
  if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointMismatch("not a checkpoint file: " + path);
  Checkpoint ck;
  ck.version = get_u32(is);
  if (ck.version != 1) throw CheckpointMismatch("unsupported checkpoint version");
  get_u32(is);  // reserved

  const std::uint64_t npts = get_u64(is);
  ck.config.points.resize(npts);
  ck.config.trainable.resize(npts);
  for (std::uint64_t j = 0; j < npts; ++j) {
    const double phi = get_f64(is);
    const double theta = get_f64(is);
    ck.config.points[j] = SpherePoint(phi, theta);
    ck.config.points[j].phi = phi;  // keep stored values bit-exact
    ck.config.points[j].theta = theta;
    ck.config.trainable[j] = get_u8(is);
  }
  ck.lambda_trainable = get_u8(is) != 0;
  ck.lambda = get_f64(is);

  const std::uint64_t ncharts = get_u64(is);
  ck.nets.resize(ncharts);
  for (std::uint64_t c = 0; c < ncharts; ++c) {
    MlpParams& p = ck.nets[c];
    const std::uint64_t nw = get_u64(is);
    p.spec.widths.resize(nw);
    for (std::uint64_t k = 0; k < nw; ++k) p.spec.widths[k] = static_cast<int>(get_u32(is));
    const std::uint64_t nd = get_u64(is);
    p.data.resize(nd);
    is.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(nd * 8));
  }

  if (get_u8(is)) {
    ck.has_optimizer = true;
    ck.opt.hp.beta1 = get_f64(is);
    ck.opt.hp.beta2 = get_f64(is);
    ck.opt.hp.eps = get_f64(is);
    ck.opt.hp.weight_decay = get_f64(is);
    ck.opt.t = get_i64(is);
    const std::uint64_t n = get_u64(is);
    ck.opt.m.resize(n);
    ck.opt.v.resize(n);
    is.read(reinterpret_cast<char*>(ck.opt.m.data()), static_cast<std::streamsize>(n * 8));
    is.read(reinterpret_cast<char*>(ck.opt.v.data()), static_cast<std::streamsize>(n * 8));
  }
  ck.rng_state = get_bytes(is);
  ck.epoch = get_i64(is);
  if (!is) throw CheckpointMismatch("truncated checkpoint: " + path);
  return ck;
}

}  // namespace z2eigen
