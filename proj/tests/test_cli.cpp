#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vhu/commands.hpp"
#include "vhu/config.hpp"
#include "vhu/container.hpp"
#include "vhu/error.hpp"
#include "vhu/hadamard.hpp"
#include "vhu/pgm.hpp"

using namespace vhu;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("vhu_cli_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& s) const { return (path_ / s).string(); }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd, const ConfigMap& cfg, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_command(cmd, cfg, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

// Small enough to train in a fraction of a second.
ConfigMap tiny_train(const std::string& data, const std::string& out) {
  return {{"data", data},
          {"out", out},
          {"epochs", "2"},
          {"seed", "3"},
          {"model.height", "16"},
          {"model.width", "16"},
          {"model.encoder_blocks", "2"},
          {"model.base_channels", "8"},
          {"model.hypernet_hidden", "8"}};
}

void simulate(const std::string& dir, std::size_t n, int size = 16, std::uint64_t seed = 1) {
  ASSERT_EQ(run("simulate", {{"out", dir}, {"n", std::to_string(n)}, {"seed", std::to_string(seed)},
                             {"height", std::to_string(size)}, {"width", std::to_string(size)}}),
            kExitOk);
}

// Log without the wall clock column.
std::string log_without_wall(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST(Config, ParseAndErrors) {
  const auto m = parse_config("# comment\n a = 1 \nb=two words # trailing\n\n");
  EXPECT_EQ(m.at("a"), "1");
  EXPECT_EQ(m.at("b"), "two words");
  EXPECT_THROW(parse_config("novalue\n"), ConfigError);
  EXPECT_THROW(parse_config("a=1\na=2\n"), ConfigError);
  EXPECT_THROW(parse_config(" = 3\n"), ConfigError);
  EXPECT_EQ(parse_config(render_config(m)), m);

  ConfigReader r({{"x", "1.5"}, {"n", "abc"}, {"flag", "true"}, {"typo", "1"}});
  EXPECT_EQ(r.get_double("x", 0), 1.5);
  EXPECT_TRUE(r.get_bool("flag", false));
  EXPECT_THROW(r.get_size("n", 1), ConfigError);
  EXPECT_THROW(r.finish(), ConfigError);
}

TEST(Config, UnknownKeyIsExitTwo) {
  TempDir t;
  std::string err;
  EXPECT_EQ(run("simulate", {{"out", t / "d"}, {"n", "1"}, {"nosuchkey", "1"}}, nullptr, &err), kExitConfig);
  EXPECT_NE(err.find("nosuchkey"), std::string::npos);
  EXPECT_EQ(run("train", {{"out", t / "o"}}), kExitConfig);
  EXPECT_EQ(run("bogus", {}), kExitConfig);
  EXPECT_EQ(run("train", {{"data", t / "missing"}, {"out", t / "o"}}), kExitConfig);
}

TEST(Manifest, RoundTrip) {
  TempDir t;
  const std::vector<ManifestEntry> m{{"a.vhut", 7, 3}, {"b.vhut", 18446744073709551615ULL, 5}};
  write_manifest(t.path(), m);
  const auto back = read_manifest(t.path());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].file, "b.vhut");
  EXPECT_EQ(back[1].seed, 18446744073709551615ULL);
  EXPECT_EQ(back[0].regions, 3u);
  std::ofstream(t.path() / kManifestName) << "wrong header\n";
  EXPECT_THROW(read_manifest(t.path()), DataError);
}

TEST(Simulate, Reproducible) {
  TempDir t;
  simulate(t / "a", 1);
  simulate(t / "b", 1);
  EXPECT_EQ(slurp(t.path() / "a" / "phantom_0000.vhut"), slurp(t.path() / "b" / "phantom_0000.vhut"));
  const auto e = read_container(t.path() / "a" / "phantom_0000.vhut");
  for (const char* name : {"clean", "bias", "corrupted", "labels"}) EXPECT_TRUE(find_entry(e, name).has_value());
  EXPECT_EQ(require_entry(e, "corrupted").shape(), (Shape{1, 16, 16}));
  EXPECT_TRUE(fs::exists(t.path() / "a" / "simulate.cfg"));
}

TEST(Simulate, ConfigEchoReproduces) {
  TempDir t;
  simulate(t / "a", 2, 16, 9);
  auto echo = load_config(t.path() / "a" / "simulate.cfg");
  echo["out"] = t / "b";
  ASSERT_EQ(run("simulate", echo), kExitOk);
  for (const char* f : {"phantom_0000.vhut", "phantom_0001.vhut"})
    EXPECT_EQ(slurp(t.path() / "a" / f), slurp(t.path() / "b" / f));
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  TempDir t;
  simulate(t / "d", 3);
  auto cfg = tiny_train(t / "d", t / "o");
  cfg["epochs"] = "0";
  ASSERT_EQ(run("train", cfg), kExitOk);
  const auto net = load_checkpoint(t.path() / "o" / "checkpoint.vhut");
  const auto init = VhuNet::init(net.config(), 3);
  const auto a = net.named_parameters(), b = init.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    for (std::size_t k = 0; k < a[i].second.numel(); ++k) EXPECT_EQ(a[i].second[k], b[i].second[k]);
  }
}

TEST(Train, DeterministicGivenSeed) {
  TempDir t;
  simulate(t / "d", 6);
  ASSERT_EQ(run("train", tiny_train(t / "d", t / "o1")), kExitOk);
  ASSERT_EQ(run("train", tiny_train(t / "d", t / "o2")), kExitOk);
  EXPECT_EQ(slurp(t.path() / "o1" / "checkpoint.vhut"), slurp(t.path() / "o2" / "checkpoint.vhut"));
  const auto log = log_without_wall(t.path() / "o1" / "train_log.csv");
  EXPECT_EQ(log, log_without_wall(t.path() / "o2" / "train_log.csv"));
  EXPECT_EQ(log.substr(0, log.find('\n')), "epoch,mse,kl,smooth,total");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
}

TEST(Train, ShapeMismatchIsDataError) {
  TempDir t;
  simulate(t / "d", 2, 32);
  EXPECT_EQ(run("train", tiny_train(t / "d", t / "o")), kExitData);
}

// Zero head weights give a unit field, so correction is the identity.
TEST(Correct, IdentityCheckpointAndBatchOrder) {
  TempDir t;
  simulate(t / "d", 3);
  auto cfg = tiny_train(t / "d", t / "o");
  cfg["epochs"] = "0";
  ASSERT_EQ(run("train", cfg), kExitOk);
  auto net = load_checkpoint(t.path() / "o" / "checkpoint.vhut");
  for (auto& v : net.head_kernel.mutable_values()) v = 0;
  for (auto& v : net.head_bias.mutable_values()) v = 0;
  save_checkpoint(t.path() / "id.vhut", net);

  const std::string inputs = t / "d/phantom_0002.vhut" + "," + t / "d/phantom_0000.vhut" + "," + t / "d/phantom_0001.vhut";
  std::string out;
  ASSERT_EQ(run("correct", {{"checkpoint", t / "id.vhut"}, {"inputs", inputs}, {"out", t / "c"}}, &out), kExitOk);
  EXPECT_NE(out.find("corrected 3 of 3"), std::string::npos);
  for (const char* stem : {"phantom_0000", "phantom_0001", "phantom_0002"}) {
    const auto src = require_entry(read_container(t.path() / "d" / (std::string(stem) + ".vhut")), "corrupted");
    const auto res = read_container(t.path() / "c" / (std::string(stem) + "_corrected.vhut"));
    const auto c = require_entry(res, "corrected"), f = require_entry(res, "field");
    for (std::size_t i = 0; i < src.numel(); ++i) {
      EXPECT_NEAR(c[i], src[i], 1e-12);
      EXPECT_NEAR(f[i], 1.0, 1e-12);
    }
  }
}

TEST(Correct, BadFileReportedOthersProcessed) {
  TempDir t;
  simulate(t / "d", 2);
  auto cfg = tiny_train(t / "d", t / "o");
  cfg["epochs"] = "0";
  ASSERT_EQ(run("train", cfg), kExitOk);
  write_container(t.path() / "bad.vhut", {{"corrupted", Tensor::full({1, 8, 8}, 1.0)}});
  std::string out, err;
  const std::string inputs = t / "d/phantom_0000.vhut" + "," + t / "bad.vhut" + "," + t / "d/phantom_0001.vhut";
  EXPECT_EQ(run("correct", {{"checkpoint", t / "o/checkpoint.vhut"}, {"inputs", inputs}, {"out", t / "c"}}, &out, &err),
            kExitData);
  EXPECT_NE(err.find("bad.vhut"), std::string::npos);
  EXPECT_TRUE(fs::exists(t.path() / "c" / "phantom_0000_corrected.vhut"));
  EXPECT_TRUE(fs::exists(t.path() / "c" / "phantom_0001_corrected.vhut"));
}

TEST(Evaluate, EmptyManifestGivesHeaderOnly) {
  TempDir t;
  write_manifest(t.path(), {});
  ASSERT_EQ(run("evaluate", {{"data", t.path().string()}, {"out", t / "e.csv"}}), kExitOk);
  EXPECT_EQ(slurp(t.path() / "e.csv"), "file,cv,snr,cnr,ssim,psnr,coco\n");
}

TEST(Evaluate, PerfectPredictionAndAggregate) {
  TempDir t;
  simulate(t / "d", 2);
  fs::create_directories(t.path() / "p");
  for (const char* stem : {"phantom_0000", "phantom_0001"}) {
    const auto e = read_container(t.path() / "d" / (std::string(stem) + ".vhut"));
    const auto bias = require_entry(e, "bias");
    auto field = bias.clone();
    for (auto& v : field.mutable_values()) v = 1.0 / v;
    write_container(t.path() / "p" / (std::string(stem) + "_corrected.vhut"),
                    {{"corrected", require_entry(e, "clean")}, {"field", field}});
  }
  ASSERT_EQ(run("evaluate", {{"data", t / "d"}, {"predictions", t / "p"}, {"out", t / "e.csv"}}), kExitOk);
  std::istringstream in(slurp(t.path() / "e.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u) << line;
    if (cells[0].rfind("phantom", 0) == 0) {
      ++rows;
      EXPECT_NEAR(std::stod(cells[4]), 1.0, 1e-12);
      EXPECT_EQ(cells[5], "inf");
      EXPECT_NEAR(std::stod(cells[6]), 1.0, 1e-9);
    } else {
      EXPECT_EQ(cells[0], "mean±std");
      EXPECT_NE(cells[4].find("±"), std::string::npos);
    }
  }
  EXPECT_EQ(rows, 2);
  fs::remove(t.path() / "p" / "phantom_0001_corrected.vhut");
  EXPECT_EQ(run("evaluate", {{"data", t / "d"}, {"predictions", t / "p"}, {"out", t / "e2.csv"}}), kExitData);
}

TEST(Fwht, ValuesAndErrors) {
  std::string out;
  ASSERT_EQ(run("fwht", {{"values", "1,0,1,0"}}, &out), kExitOk);
  EXPECT_EQ(out, "2 2 0 0\n");
  ASSERT_EQ(run("fwht", {{"values", "2,2,0,0"}, {"inverse", "true"}}, &out), kExitOk);
  EXPECT_EQ(out, "1 0 1 0\n");
  EXPECT_EQ(run("fwht", {{"values", "1,2,3"}}), kExitConfig);
  EXPECT_EQ(run("fwht", {}), kExitConfig);
}

TEST(Fwht, ImageRoundTrip) {
  TempDir t;
  simulate(t / "d", 1);
  ASSERT_EQ(run("fwht", {{"input", t / "d/phantom_0000.vhut"}, {"output", t / "h.vhut"}}), kExitOk);
  std::string entry = read_container(t.path() / "h.vhut").front().first;
  ASSERT_EQ(run("fwht", {{"input", t / "h.vhut"}, {"entry", entry}, {"inverse", "true"}, {"output", t / "x.vhut"}}),
            kExitOk);
  const auto back = read_container(t.path() / "x.vhut").front().second;
  const auto src = require_entry(read_container(t.path() / "d/phantom_0000.vhut"), "corrupted");
  for (std::size_t i = 0; i < src.numel(); ++i) EXPECT_NEAR(back[i], src[i], 1e-12);
}

TEST(Pgm, RoundTripKeepsOrdering) {
  TempDir t;
  std::vector<double> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>((i * 7) % 12);
  write_pgm16(t.path() / "a.pgm", Tensor({1, 3, 4}, v));
  const auto back = read_pgm16(t.path() / "a.pgm");
  EXPECT_EQ(back.shape(), (Shape{1, 3, 4}));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], std::round(v[i] / 1.1 * 65535), 0.5);
  std::ofstream(t.path() / "bad.pgm") << "P2\n1 1\n255\n0\n";
  EXPECT_THROW(read_pgm16(t.path() / "bad.pgm"), DataError);
}

TEST(Train, DivergenceNamesEpochAndExitsFour) {
  TempDir t;
  simulate(t / "d", 3);
  auto cfg = tiny_train(t / "d", t / "o");
  cfg["lr"] = "1e200";
  std::string err;
  EXPECT_EQ(run("train", cfg, nullptr, &err), kExitNumerical);
  EXPECT_NE(err.find("diverged at epoch"), std::string::npos) << err;
}
