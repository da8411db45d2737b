#include "vhu/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "vhu/bias_sim.hpp"
#include "vhu/container.hpp"
#include "vhu/error.hpp"
#include "vhu/hadamard.hpp"
#include "vhu/loss.hpp"
#include "vhu/metrics.hpp"
#include "vhu/ops.hpp"
#include "vhu/optim.hpp"
#include "vhu/pgm.hpp"

namespace fs = std::filesystem;

namespace vhu {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string sample_name(std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "phantom_%04zu.vhut", i);
  return buf;
}

struct Sample {
  std::string file;
  Tensor clean, bias, corrupted;
};

std::vector<Sample> load_dataset(const fs::path& dir) {
  std::vector<Sample> out;
  for (const auto& e : read_manifest(dir)) {
    const auto entries = read_container(dir / e.file);
    out.push_back({e.file, require_entry(entries, "clean"), require_entry(entries, "bias"),
                   require_entry(entries, "corrupted")});
  }
  return out;
}

VhuNetConfig model_config_from(ConfigReader& reader) {
  const auto preset = reader.get_string("preset", "desk");
  VhuNetConfig base;
  if (preset == "paper") {
    base = VhuNetConfig::paper();
  } else if (preset == "desk") {
    base = VhuNetConfig::desk();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
  }
  auto kv = base.to_map();
  for (const auto& [k, v] : reader.take_prefixed("model.")) {
    if (!kv.count(k)) throw ConfigError("unknown model key 'model." + k + "'");
    kv[k] = v;
  }
  auto cfg = VhuNetConfig::from_map(kv);
  cfg.validate();
  return cfg;
}

double mean_val_coco(const VhuNet& net, const std::vector<Sample>& val) {
  double acc = 0;
  for (const auto& s : val) {
    const auto c = correct(net, s.corrupted);
    acc += coco(div(Tensor::full(c.field.shape(), 1.0), c.field), s.bias);
  }
  return acc / static_cast<double>(val.size());
}

// One of the eight symmetries of the square applied to a [1,N,N] image:
// bit 0 flips columns, bit 1 flips rows, bit 2 transposes.
Tensor dihedral(const Tensor& x, unsigned code) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  const bool tr = (code & 4u) != 0;
  const std::size_t oh = tr ? w : h, ow = tr ? h : w;
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      std::size_t si = tr ? j : i, sj = tr ? i : j;
      if (code & 1u) sj = w - 1 - sj;
      if (code & 2u) si = h - 1 - si;
      out[i * ow + j] = v[si * w + sj];
    }
  return Tensor({1, oh, ow}, std::move(out));
}

std::vector<fs::path> expand_inputs(const std::string& spec) {
  std::vector<fs::path> out;
  for (const auto& item : split_list(spec, ',')) {
    const fs::path p(item);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".vhut") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

void write_manifest(const fs::path& dir, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(dir / kManifestName, std::ios::binary);
  out << "file\tseed\tregions\n";
  for (const auto& e : entries) out << e.file << '\t' << e.seed << '\t' << e.regions << '\n';
  if (!out) throw DataError("cannot write manifest in " + dir.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName, std::ios::binary);
  if (!in) throw DataError("no manifest in " + dir.string());
  std::string line;
  if (!std::getline(in, line) || line != "file\tseed\tregions") throw DataError("bad manifest header in " + dir.string());
  std::vector<ManifestEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_list(line, '\t');
    if (cols.size() != 3) throw DataError("manifest line " + std::to_string(line_no) + ": expected 3 columns");
    try {
      out.push_back({cols[0], std::stoull(cols[1]), std::stoul(cols[2])});
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

bool in_validation_split(const std::string& file_name, double fraction) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : file_name) h = (h ^ c) * 0x100000001b3ULL;
  return static_cast<double>(h % 1000) < fraction * 1000.0;
}

void save_checkpoint(const fs::path& path, const VhuNet& net) {
  write_container(path, net.named_parameters());
  auto sidecar = path;
  save_config(sidecar.replace_extension(".cfg"), net.config().to_map());
}

VhuNet load_checkpoint(const fs::path& path) {
  auto sidecar = path;
  sidecar.replace_extension(".cfg");
  if (!fs::exists(sidecar)) throw DataError("checkpoint config missing: " + sidecar.string());
  const auto cfg = VhuNetConfig::from_map(load_config(sidecar));
  cfg.validate();
  auto net = VhuNet::init(cfg, 0);
  net.load_parameters(read_container(path));
  return net;
}

int cmd_simulate(const ConfigMap& config, std::ostream& out) {
  ConfigReader r(config);
  const fs::path dir = r.require_string("out");
  const auto n = r.get_size("n", 200);
  const auto seed = r.get_u64("seed", 0);
  const auto height = r.get_size("height", 32);
  const auto width = r.get_size("width", 32);
  const auto regions = r.get_size("regions", 4);
  PhantomOptions opt;
  opt.field.basis = parse_bias_basis(r.get_string("basis", "random_polynomial"));
  opt.field.order = static_cast<int>(r.get_size("order", 4));
  opt.field.range_lo = r.get_double("range_lo", 0.1);
  opt.field.range_hi = r.get_double("range_hi", 1.9);
  opt.noise_sigma = r.get_double("noise_sigma", 0.0);
  const bool pgm = r.get_bool("pgm", false);
  r.finish();
  opt.field.validate();
  if (regions < 2) throw ConfigError("regions must be at least 2");
  if (opt.noise_sigma < 0) throw ConfigError("noise_sigma must be nonnegative");
  ensure_dir(dir);
  if (pgm) ensure_dir(dir / "preview");

  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = mix_seed(seed + i);
    const auto p = make_phantom(height, width, regions, s, opt);
    const auto name = sample_name(i);
    write_container(dir / name, {{"clean", p.clean}, {"bias", p.bias}, {"corrupted", p.corrupted}, {"labels", p.labels}});
    if (pgm) {
      const auto stem = fs::path(name).stem().string();
      write_pgm16(dir / "preview" / (stem + "_clean.pgm"), p.clean);
      write_pgm16(dir / "preview" / (stem + "_bias.pgm"), p.bias);
      write_pgm16(dir / "preview" / (stem + "_corrupted.pgm"), p.corrupted);
    }
    manifest.push_back({name, s, regions});
  }
  write_manifest(dir, manifest);
  save_config(dir / "simulate.cfg", r.resolved());
  out << "wrote " << n << " phantoms to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const ConfigMap& config, std::ostream& out) {
  ConfigReader r(config);
  const fs::path data = r.require_string("data");
  const fs::path dir = r.require_string("out");
  const auto seed = r.get_u64("seed", 0);
  const auto epochs = r.get_size("epochs", 100);
  const auto batch = r.get_size("batch", 5);
  AdamWConfig opt;
  opt.learning_rate = r.get_double("lr", 1e-3);
  opt.weight_decay = r.get_double("weight_decay", 0.01);
  LossConfig loss_cfg;
  loss_cfg.delta = r.get_double("delta", loss_cfg.delta);
  loss_cfg.kl_weight = r.get_double("kl_weight", loss_cfg.kl_weight);
  loss_cfg.smooth_weight = r.get_double("smooth_weight", loss_cfg.smooth_weight);
  if (r.has("reverse_kl")) loss_cfg.reverse_kl = r.get_bool("reverse_kl", true);
  const auto val_fraction = r.get_double("val_fraction", 0.1);
  const bool verbose = r.get_bool("verbose", false);
  const bool augment = r.get_bool("augment", true);
  auto model_cfg = model_config_from(r);
  r.finish();
  loss_cfg.validate();
  if (batch == 0) throw ConfigError("batch must be positive");
  if (!(val_fraction >= 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (!fs::exists(data / kManifestName)) throw ConfigError("no dataset manifest in " + data.string());
  ensure_dir(dir);

  std::vector<Sample> train, val;
  for (auto& s : load_dataset(data)) {
    if (s.corrupted.shape() != Shape{1, model_cfg.height, model_cfg.width}) {
      throw DataError(s.file + ": shape " + shape_str(s.corrupted.shape()) + " does not match the model input");
    }
    (in_validation_split(s.file, val_fraction) ? val : train).push_back(std::move(s));
  }
  if (train.empty()) throw DataError("training split is empty");
  // Transposes only make sense for square inputs.
  const unsigned n_sym = model_cfg.height == model_cfg.width ? 8u : 4u;

  auto net = VhuNet::init(model_cfg, seed);
  AdamW optimizer(net.parameters(), opt);
  const fs::path ckpt = dir / "checkpoint.vhut";
  save_config(dir / "train.cfg", r.resolved());
  save_checkpoint(ckpt, net);

  std::ofstream log(dir / "train_log.csv", std::ios::binary);
  log << "epoch,mse,kl,smooth,total" << (val.empty() ? "" : ",val_coco") << ",wall_seconds\n";
  std::mt19937_64 rng(mix_seed(seed ^ 0x7EA1ULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best = -2;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sums[4] = {0, 0, 0, 0};
    try {
      for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
        const std::size_t b1 = std::min(order.size(), b0 + batch);
        optimizer.zero_grad();
        for (std::size_t k = b0; k < b1; ++k) {
          const auto& s = train[order[k]];
          const unsigned code = augment ? static_cast<unsigned>(rng() % n_sym) : 0u;
          const Tensor x = code ? dihedral(s.corrupted, code) : s.corrupted;
          const Tensor clean = code ? dihedral(s.clean, code) : s.clean;
          const auto norm = Normalization::of(x);
          const auto fwd = net.forward(norm.apply(x));
          const auto terms = total_loss(mul(x, fwd.field), clean, fwd.latent, fwd.field, loss_cfg);
          sums[0] += terms.mse.item();
          sums[1] += terms.kl.item();
          sums[2] += terms.smooth.item();
          sums[3] += terms.total.item();
          backward(mul_scalar(terms.total, 1.0 / static_cast<double>(b1 - b0)));
        }
        optimizer.step();
      }
    } catch (const NumericalError& e) {
      reset_tape();
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double n = static_cast<double>(train.size());
    log << epoch << ',' << fmt_full(sums[0] / n) << ',' << fmt_full(sums[1] / n) << ',' << fmt_full(sums[2] / n) << ','
        << fmt_full(sums[3] / n);
    double score = 0;
    if (!val.empty()) {
      score = mean_val_coco(net, val);
      log << ',' << fmt_full(score);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << ',' << fmt(wall) << '\n';
    log.flush();
    // Without a validation split the latest epoch wins.
    if (val.empty() || score > best) {
      best = score;
      save_checkpoint(ckpt, net);
    }
    if (verbose) {
      out << "epoch " << epoch << " total " << fmt(sums[3] / n);
      if (!val.empty()) out << " val_coco " << fmt(score);
      out << " (" << fmt(wall) << " s)\n";
    }
  }
  if (!log) throw DataError("cannot write training log in " + dir.string());
  out << "trained " << epochs << " epochs on " << train.size() << " images (" << val.size()
      << " validation); checkpoint " << ckpt.string() << "\n";
  return kExitOk;
}

int cmd_correct(const ConfigMap& config, std::ostream& out, std::ostream& err) {
  ConfigReader r(config);
  const fs::path ckpt = r.require_string("checkpoint");
  const auto inputs = expand_inputs(r.require_string("inputs"));
  const fs::path dir = r.require_string("out");
  const auto entry = r.get_string("entry", "corrupted");
  const bool pgm = r.get_bool("pgm", false);
  r.finish();
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw ConfigError("input not found: " + p.string());
  ensure_dir(dir);
  save_config(dir / "correct.cfg", r.resolved());
  const auto net = load_checkpoint(ckpt);

  std::size_t failed = 0, done = 0;
  double millis = 0;
  for (const auto& p : inputs) {
    try {
      const auto x = require_entry(read_container(p), entry);
      const auto t0 = std::chrono::steady_clock::now();
      const auto c = correct(net, x);
      millis += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      const auto stem = p.stem().string();
      write_container(dir / (stem + "_corrected.vhut"), {{"corrected", c.corrected}, {"field", c.field}});
      if (pgm) {
        write_pgm16(dir / (stem + "_corrected.pgm"), c.corrected);
        write_pgm16(dir / (stem + "_field.pgm"), c.field);
      }
      ++done;
    } catch (const std::exception& e) {
      // ShapeError, DataError, bad containers: report and keep going.
      err << "error: " << p.string() << ": " << e.what() << "\n";
      ++failed;
    }
  }
  out << "corrected " << done << " of " << inputs.size() << " images";
  if (done > 0) out << ", " << fmt(millis / static_cast<double>(done)) << " ms per image";
  out << "\n";
  return failed == 0 ? kExitOk : kExitData;
}

int cmd_evaluate(const ConfigMap& config, std::ostream& out) {
  ConfigReader r(config);
  const fs::path data = r.require_string("data");
  const std::string predictions = r.get_string("predictions", "");
  const fs::path csv = r.require_string("out");
  const auto entry = r.get_string("entry", predictions.empty() ? "corrupted" : "corrected");
  r.finish();
  if (!fs::exists(data / kManifestName)) throw ConfigError("no dataset manifest in " + data.string());
  if (!predictions.empty() && !fs::is_directory(predictions)) {
    throw ConfigError("predictions directory not found: " + predictions);
  }
  if (csv.has_parent_path()) ensure_dir(csv.parent_path());

  static const char* names[] = {"cv", "snr", "cnr", "ssim", "psnr", "coco"};
  std::vector<std::vector<double>> columns(6);
  std::ostringstream rows;
  for (const auto& m : read_manifest(data)) {
    const auto ref = read_container(data / m.file);
    const auto clean = require_entry(ref, "clean"), bias = require_entry(ref, "bias"),
               labels = require_entry(ref, "labels");
    std::vector<NamedTensor> pred = ref;
    if (!predictions.empty()) {
      const fs::path p = fs::path(predictions) / (fs::path(m.file).stem().string() + "_corrected.vhut");
      if (!fs::exists(p)) throw DataError("unpaired file: no prediction for " + m.file);
      pred = read_container(p);
    }
    const auto image = require_entry(pred, entry);
    std::optional<Tensor> inv_field;
    if (const auto f = find_entry(pred, "field")) inv_field = div(Tensor::full(f->shape(), 1.0), *f);
    const auto rep = phantom_report(image, clean, labels, m.regions, inv_field ? &*inv_field : nullptr, &bias);
    const std::optional<double> vals[] = {rep.cv, rep.snr, rep.cnr, rep.ssim, rep.psnr, rep.coco};
    rows << m.file;
    for (std::size_t k = 0; k < 6; ++k) {
      rows << ',';
      if (vals[k]) {
        rows << fmt(*vals[k]);
        columns[k].push_back(*vals[k]);
      }
    }
    rows << '\n';
  }

  std::ofstream f(csv, std::ios::binary);
  f << "file";
  for (const char* n : names) f << ',' << n;
  f << '\n' << rows.str();
  if (!columns[0].empty()) {
    f << "mean±std";
    for (const auto& c : columns) {
      f << ',';
      if (!c.empty()) {
        const auto s = summarize(c);
        f << fmt(s.mean) << "±" << fmt(s.std);
      }
    }
    f << '\n';
  }
  if (!f) throw DataError("cannot write " + csv.string());
  out << "evaluated " << columns[0].size() << " images -> " << csv.string() << "\n";
  return kExitOk;
}

int cmd_fwht(const ConfigMap& config, std::ostream& out) {
  ConfigReader r(config);
  const auto values = r.get_string("values", "");
  const auto input = r.get_string("input", "");
  const auto entry = r.get_string("entry", "corrupted");
  const auto output = r.get_string("output", "");
  const bool inverse = r.get_bool("inverse", false);
  r.finish();
  if (values.empty() == input.empty()) throw ConfigError("fwht needs exactly one of 'values' or 'input'");

  if (!values.empty()) {
    std::vector<double> v;
    for (const auto& s : split_list(values, ',')) {
      try {
        v.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw ConfigError("fwht: bad number '" + s + "'");
      }
    }
    if (!is_power_of_two(v.size())) throw ConfigError("fwht: length must be a power of two");
    fwht(v);
    if (inverse)
      for (auto& x : v) x /= static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << fmt(v[i]);
    out << "\n";
    return kExitOk;
  }
  if (output.empty()) throw ConfigError("fwht: 'output' is required with 'input'");
  const auto x = require_entry(read_container(input), entry);
  const auto y = inverse ? iht2d(x) : ht2d(x);
  write_container(output, {{inverse ? "iht2d" : "ht2d", y}});
  out << "wrote " << output << "\n";
  return kExitOk;
}

int run_command(const std::string& name, const ConfigMap& config, std::ostream& out, std::ostream& err) {
  try {
    if (name == "simulate") return cmd_simulate(config, out);
    if (name == "train") return cmd_train(config, out);
    if (name == "correct") return cmd_correct(config, out, err);
    if (name == "evaluate") return cmd_evaluate(config, out);
    if (name == "fwht") return cmd_fwht(config, out);
    err << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    // Out-of-range settings rejected by validate() helpers.
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace vhu
