#pragma once

// In-process multi-cloud cluster and a scripted scenario runner for fault
// injection and accounting checks.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdstore/client.hpp"
#include "cdstore/server.hpp"

namespace cdstore::sim {

/// n servers on loopback ephemeral ports, each with its own backend
/// directory under `root`. Ports survive stop/start.
class SimCluster {
 public:
  struct Options {
    std::size_t cache_capacity = 128;
    bool verify_on_read = true;
    bool quiet = true;
  };

  SimCluster(int clouds, std::filesystem::path root, Options options);
  SimCluster(int clouds, std::filesystem::path root) : SimCluster(clouds, std::move(root), Options{}) {}
  ~SimCluster();

  int size() const { return static_cast<int>(servers_.size()); }
  Server& server(int cloud) { return *servers_.at(static_cast<std::size_t>(cloud)); }
  std::vector<net::Endpoint> endpoints() const;

  void stop(int cloud);
  void start(int cloud);

  ClientConfig client_config(UserId user, const CodingParams& params, const ChunkParams& chunking,
                             unsigned workers = 1) const;

  /// Flips one bit inside the stored share of secret `sequence` of a file on
  /// `cloud`, then drops the server's container cache.
  void corrupt_share(int cloud, UserId user, const std::string& pathname, std::uint64_t sequence,
                     const CodingParams& params);

  std::uint64_t physical_share_bytes();

 private:
  std::filesystem::path root_;
  std::vector<std::unique_ptr<Server>> servers_;
};

enum class Expect { ok, ok_retried, insufficient_clouds, unrecoverable, not_found };

struct FileSpec {
  enum class Kind { random, copy, mutate };
  std::string name;
  Kind kind = Kind::random;
  std::uint64_t size = 0;
  std::string source;
  double fraction = 0;
};

struct Step {
  enum class Kind { backup, restore, stop, start, corrupt };
  Kind kind = Kind::backup;
  int line = 0;
  UserId user = 0;
  std::string file;
  int cloud = 0;
  std::uint64_t sequence = 0;
  Expect expect = Expect::ok;
};

/// Scenario text format, one directive per line, `#` comments:
///
///   n 4
///   k 3
///   seed 42
///   chunking variable            # or: chunking fixed 4096
///   verify_on_read off           # servers skip fingerprint checks on read
///   file A random 2000000
///   file B copy A
///   file C mutate A 0.01         # fraction of bytes overwritten
///   backup <user> <file> [expect ok|insufficient]
///   restore <user> <file> [expect ok|retried|insufficient|unrecoverable|not-found]
///   stop <cloud>
///   start <cloud>
///   corrupt <cloud> <user> <file> <sequence>
struct Scenario {
  CodingParams params;
  ChunkParams chunking;
  std::uint64_t seed = 1;
  bool verify_on_read = true;
  std::vector<FileSpec> files;
  std::vector<Step> steps;

  static Scenario parse(std::string_view text);
  static Scenario load(const std::filesystem::path& path);
};

struct StepOutcome {
  int line = 0;
  std::string description;
  bool passed = false;
  std::string detail;
};

struct ScenarioReport {
  std::vector<StepOutcome> steps;
  std::uint64_t logical_data = 0;
  std::uint64_t logical_shares = 0;
  std::uint64_t transferred_shares = 0;
  std::uint64_t physical_shares = 0;
  std::vector<std::uint64_t> physical_per_cloud;

  bool passed() const;
  double intra_saving() const;
  double inter_saving() const;
};

/// Materializes the scenario's file contents, deterministic in the seed.
std::vector<std::pair<std::string, Bytes>> materialize_files(const Scenario& scenario);

/// Pathname a scenario file is backed up under.
std::string scenario_pathname(const std::string& file);

/// Runs the scenario against a fresh cluster under `workdir` (a temporary
/// directory when empty, removed afterwards).
ScenarioReport run_scenario(const Scenario& scenario, std::filesystem::path workdir = {});

std::string format_report(const ScenarioReport& report);

}  // namespace cdstore::sim
