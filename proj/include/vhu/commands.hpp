#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vhu/config.hpp"
#include "vhu/model.hpp"

namespace vhu {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

struct ManifestEntry {
  std::string file;  // relative to the dataset directory
  std::uint64_t seed = 0;
  std::size_t regions = 0;
};

inline constexpr const char* kManifestName = "manifest.tsv";

// Tab-separated "file seed regions" with a header line.
void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

// Seed-stable split: FNV-1a of the file name, bucketed per mille.
bool in_validation_split(const std::string& file_name, double fraction);

// Checkpoint = parameter container plus a sidecar .cfg holding the model config.
void save_checkpoint(const std::filesystem::path& path, const VhuNet& net);
VhuNet load_checkpoint(const std::filesystem::path& path);

// Each command validates its config before doing any work and writes the
// resolved config beside its outputs. They throw the error types of
// vhu/error.hpp; run_command maps those to exit codes.
int cmd_simulate(const ConfigMap& config, std::ostream& out);
int cmd_train(const ConfigMap& config, std::ostream& out);
int cmd_correct(const ConfigMap& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const ConfigMap& config, std::ostream& out);
int cmd_fwht(const ConfigMap& config, std::ostream& out);

int run_command(const std::string& name, const ConfigMap& config, std::ostream& out, std::ostream& err);

}  // namespace vhu
