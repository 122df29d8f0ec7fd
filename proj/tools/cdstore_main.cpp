#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"
#include "cdstore/analytics.hpp"
#include "cdstore/client.hpp"
#include "cdstore/error.hpp"
#include "cdstore/server.hpp"
#include "cdstore/simharness.hpp"

#ifndef CDSTORE_TOOL
#define CDSTORE_TOOL ""
#endif

namespace {

using namespace cdstore;

constexpr const char* kStateDirEnv = "CDSTORE_CLIENT_STATE_DIR";

std::filesystem::path default_state_dir() {
  if (const char* env = std::getenv(kStateDirEnv); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".cdstore";
  return ".cdstore";
}

ClientConfig load_client_config(const std::string& path) {
  auto cfg = ClientConfig::load(path);
  if (cfg.state_dir.empty()) cfg.state_dir = default_state_dir();
  return cfg;
}

struct ServerArgs {
  std::string listen = "0.0.0.0:9100";
  std::string backend;
  std::uint32_t cloud_index = 0;
  std::size_t cache = 128;
  std::string salt_file;
};

int run_server(const ServerArgs& a) {
  ServerConfig cfg;
  cfg.listen = net::Endpoint::parse(a.listen);
  cfg.backend_root = a.backend;
  cfg.cloud_index = a.cloud_index;
  cfg.cache_capacity = a.cache;
  cfg.salt_file = a.salt_file;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Server server(std::move(cfg));
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  // run() also returns if the server stops for another reason; wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

void print_backup(const BackupReport& r) {
  std::cout << "logical_bytes\t" << r.logical_bytes << "\nsecrets\t" << r.secrets << '\n';
  std::cout << "cloud\tlogical_shares\ttransferred_shares\tduplicate_shares\tmetadata\n";
  for (std::size_t c = 0; c < r.logical_share_bytes.size(); ++c)
    std::cout << c << '\t' << r.logical_share_bytes[c] << '\t' << r.transferred_share_bytes[c] << '\t'
              << r.duplicate_share_bytes[c] << '\t' << r.metadata_bytes[c] << '\n';
  std::cout << std::fixed << std::setprecision(4) << "intra_user_saving\t" << r.intra_user_saving() << '\n';
}

void print_restore(const RestoreReport& r) {
  std::cout << "bytes\t" << r.bytes << "\nsecrets\t" << r.secrets << "\nclouds_used\t";
  for (std::size_t i = 0; i < r.clouds_used.size(); ++i) std::cout << (i ? "," : "") << r.clouds_used[i];
  std::cout << "\nretried_secrets\t" << r.retried_secrets.size() << '\n';
}

void add_server(CLI::App& app, ServerArgs& a) {
  app.add_option("--listen", a.listen, "Address to listen on (host:port)")->capture_default_str();
  app.add_option("--backend", a.backend, "Directory holding containers and indices")->required();
  app.add_option("--cloud-index", a.cloud_index, "Position of this cloud among the n clouds")
      ->capture_default_str();
  app.add_option("--cache", a.cache, "Container cache size, in containers")->capture_default_str();
  app.add_option("--salt-file", a.salt_file,
                 std::string("Server salt file (default: $") + kSaltFileEnv + ", else <backend>/server.salt)");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string tool = CDSTORE_TOOL;
  CLI::App app{tool.empty() ? "Deduplicated multi-cloud backup storage" : "cdstore " + tool};
  app.require_subcommand(tool == "server" ? 0 : 1);

  ServerArgs server_args;
  CLI::App* server_cmd = nullptr;
  CLI::App* client_cmd = &app;
  CLI::App* sim_cmd = &app;
  CLI::App* analytics_cmd = &app;
  if (tool.empty()) {
    server_cmd = app.add_subcommand("server", "Run a storage server for one cloud");
    add_server(*server_cmd, server_args);
    client_cmd = app.add_subcommand("client", "Back up and restore files");
    client_cmd->require_subcommand(1);
    sim_cmd = app.add_subcommand("sim", "Run fault-injection scenarios");
    sim_cmd->require_subcommand(1);
    analytics_cmd = app.add_subcommand("analytics", "Trace and cost analyses");
    analytics_cmd->require_subcommand(1);
  } else if (tool == "server") {
    add_server(app, server_args);
  }

  std::string config, file, pathname, out, scenario, trace, pricing;
  double weekly_tb = 0, dedup_ratio = 0;
  int weeks = 0, n = 4, k = 3;

  CLI::App* backup = nullptr;
  CLI::App* restore = nullptr;
  CLI::App* stats = nullptr;
  if (tool.empty() || tool == "client") {
    backup = client_cmd->add_subcommand("backup", "Back up a file");
    backup->add_option("file", file, "File to back up")->required()->check(CLI::ExistingFile);
    backup->add_option("--config", config, "Client configuration file")->required();
    backup->add_option("--pathname", pathname, "Name to store the file under (default: absolute path)");
    restore = client_cmd->add_subcommand("restore", "Restore a file");
    restore->add_option("pathname", pathname, "Pathname the file was backed up under")->required();
    restore->add_option("--out", out, "Output file")->required();
    restore->add_option("--config", config, "Client configuration file")->required();
    stats = client_cmd->add_subcommand("stats", "Summarize past backups");
    stats->add_option("--config", config, "Client configuration file (selects the state directory)");
  }

  CLI::App* sim_run = nullptr;
  if (tool.empty() || tool == "sim") {
    sim_run = sim_cmd->add_subcommand("run", "Run a scenario against an in-process cluster");
    sim_run->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  }

  CLI::App* trace_cmd = nullptr;
  CLI::App* cost_cmd = nullptr;
  if (tool.empty() || tool == "analytics") {
    trace_cmd = analytics_cmd->add_subcommand("trace", "Per-epoch deduplication savings of a backup trace");
    trace_cmd->add_option("file", trace, "Trace file")->required()->check(CLI::ExistingFile);
    trace_cmd->add_option("-n", n, "Number of clouds")->capture_default_str();
    trace_cmd->add_option("-k", k, "Clouds needed to restore")->capture_default_str();
    cost_cmd = analytics_cmd->add_subcommand("cost", "Monthly cost against AONT-RS and a single cloud");
    cost_cmd->add_option("--weekly-tb", weekly_tb, "Size of each weekly backup in TB")->required();
    cost_cmd->add_option("--dedup-ratio", dedup_ratio, "Logical over physical data")->required();
    cost_cmd->add_option("--weeks", weeks, "Weekly backups retained")->required();
    cost_cmd->add_option("--pricing", pricing, "Pricing file")->required()->check(CLI::ExistingFile);
    cost_cmd->add_option("-n", n, "Number of clouds")->capture_default_str();
    cost_cmd->add_option("-k", k, "Clouds needed to restore")->capture_default_str();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (tool == "server" || (server_cmd && server_cmd->parsed())) return run_server(server_args);
    if (backup && backup->parsed()) {
      Client client(load_client_config(config));
      print_backup(pathname.empty() ? client.backup(file) : client.backup(file, pathname));
      return 0;
    }
    if (restore && restore->parsed()) {
      Client client(load_client_config(config));
      print_restore(client.restore(pathname, out));
      return 0;
    }
    if (stats && stats->parsed()) {
      const auto dir = config.empty() ? default_state_dir() : load_client_config(config).state_dir;
      std::cout << format_history(dir);
      return 0;
    }
    if (sim_run && sim_run->parsed()) {
      const auto report = sim::run_scenario(sim::Scenario::load(scenario));
      std::cout << sim::format_report(report);
      return report.passed() ? 0 : 1;
    }
    if (trace_cmd && trace_cmd->parsed()) {
      CodingParams params{n, k};
      std::cout << analytics::format_analysis(analytics::analyze_trace(analytics::BackupTrace::load(trace), params));
      return 0;
    }
    if (cost_cmd && cost_cmd->parsed()) {
      CodingParams params{n, k};
      std::cout << analytics::format_cost(analytics::estimate_cost(weekly_tb, dedup_ratio, weeks, params,
                                                                   analytics::PricingModel::load(pricing)));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::usage || e.code() == Errc::parse ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
