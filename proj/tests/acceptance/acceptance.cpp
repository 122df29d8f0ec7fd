// Runs each acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is non-zero if any criterion fails.
//
//   acceptance            run all criteria
//   acceptance 3 7        run only criteria 3 and 7

#include <atomic>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "cdstore/analytics.hpp"
#include "cdstore/caont.hpp"
#include "cdstore/chunker.hpp"
#include "cdstore/client.hpp"
#include "cdstore/error.hpp"
#include "cdstore/parallel.hpp"
#include "cdstore/simharness.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace cdstore;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

BackupReport backup_bytes(Client& c, const Bytes& data, const std::string& path) {
  std::istringstream in(testutil::to_string(data));
  return c.backup_stream(in, path);
}

Bytes restore_bytes(Client& c, const std::string& path, RestoreReport* report = nullptr) {
  std::ostringstream out;
  const auto r = c.restore_stream(path, out);
  if (report) *report = r;
  return testutil::from_string(out.str());
}

std::uint64_t share_backend_bytes(sim::SimCluster& cluster) {
  std::uint64_t total = 0;
  for (int c = 0; c < cluster.size(); ++c) total += cluster.server(c).stats().physical_share_bytes;
  return total;
}

std::uint64_t all_backend_bytes(sim::SimCluster& cluster) {
  std::uint64_t total = 0;
  for (int c = 0; c < cluster.size(); ++c) {
    cluster.server(c).flush();
    total += cluster.server(c).stats().backend_bytes;
  }
  return total;
}

// 1. Every k-subset of every encoding decodes byte-identically.
Result codec_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uint64_t decodes = 0;
  for (CodingParams params : {CodingParams{4, 3}, CodingParams{6, 4}, CodingParams{8, 5}}) {
    ConvergentDispersal codec(params);
    const auto subsets = testutil::subsets(params.n, params.k);
    for (int i = 0; i < 10000; ++i) {
      const std::size_t size = 1 + rng() % 16384;
      const auto secret = testutil::random_bytes(size, rng());
      const auto shares = codec.encode(secret);
      std::vector<ShareSlice> pick;
      for (const auto& idx : subsets) {
        pick.clear();
        for (int j : idx) pick.push_back(shares[static_cast<std::size_t>(j)]);
        if (codec.decode(pick, size).data != secret)
          return {false, fmt("(%d,%d) secret %d of %zu bytes mismatched", params.n, params.k, i, size)};
        ++decodes;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {secs < 120, fmt("30000 secrets, %llu subset decodes in %.1fs (limit 120s)",
                          static_cast<unsigned long long>(decodes), secs)};
}

// 2. Independent clients produce bit-identical shares for identical secrets.
Result determinism() {
  std::mt19937_64 rng(2);
  ConvergentDispersal a({4, 3});
  ConvergentDispersal b({4, 3});
  for (int i = 0; i < 2000; ++i) {
    const auto secret = testutil::random_bytes(1 + rng() % 16384, rng());
    if (a.encode(secret) != b.encode(secret)) return {false, fmt("codec instances diverged on secret %d", i)};
  }
  testutil::TempDir dir;
  sim::SimCluster cluster(4, dir.path());
  Client alice(cluster.client_config(1, {4, 3}, {}));
  Client bob(cluster.client_config(2, {4, 3}, {}, 2));
  const auto data = testutil::random_bytes(4u << 20, 3);
  backup_bytes(alice, data, "/shared");
  const auto before = share_backend_bytes(cluster);
  backup_bytes(bob, data, "/shared");
  const auto after = share_backend_bytes(cluster);
  return {after == before, fmt("2000 secrets identical across instances; second client's 4MB upload added %llu share bytes",
                               static_cast<unsigned long long>(after - before))};
}

// 3. Any single cloud failure is tolerated; any two are not.
Result fault_tolerance() {
  const auto t0 = Clock::now();
  std::ostringstream script;
  script << "n 4\nk 3\nseed 3\nfile f random 3000000\nbackup 1 f\n";
  for (int c = 0; c < 4; ++c) script << "stop " << c << "\nrestore 1 f\nstart " << c << "\n";
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      script << "stop " << a << "\nstop " << b << "\nrestore 1 f expect insufficient\nstart " << a << "\nstart " << b
             << "\n";
  const auto report = sim::run_scenario(sim::Scenario::parse(script.str()));
  int singles = 0, pairs = 0;
  for (const auto& s : report.steps) {
    if (s.description.rfind("restore", 0) != 0) continue;
    if (!s.passed) return {false, "step failed: " + s.description + " (" + s.detail + ")"};
    (s.description.find("insufficient") != std::string::npos ? pairs : singles)++;
  }
  const double secs = seconds_since(t0);
  return {report.passed() && singles == 4 && pairs == 6 && secs < 60,
          fmt("restored with each of 4 clouds down; all 6 double failures refused; %.1fs (limit 60s)", secs)};
}

// 4. One flipped bit is survived and reported; two clouds damaged is a named failure.
Result corruption_recovery() {
  std::string notes;
  for (bool verify : {false, true}) {
    testutil::TempDir dir;
    sim::SimCluster::Options opts;
    opts.verify_on_read = verify;
    sim::SimCluster cluster(4, dir.path(), opts);
    Client client(cluster.client_config(1, {4, 3}, {}));
    const auto data = testutil::random_bytes(1u << 20, 4);
    backup_bytes(client, data, "/f");
    cluster.corrupt_share(0, 1, "/f", 5, {4, 3});
    RestoreReport report;
    if (restore_bytes(client, "/f", &report) != data) return {false, "restore after one flipped bit differs"};
    if (report.retried_secrets != std::vector<std::uint64_t>{5})
      return {false, fmt("retry not reported (verify_on_read=%d)", verify)};
    cluster.corrupt_share(2, 1, "/f", 5, {4, 3});
    try {
      restore_bytes(client, "/f");
      return {false, "restore with two damaged shares did not fail"};
    } catch (const Error& e) {
      const std::string what = e.what();
      if (e.code() != Errc::all_subsets_failed || what.find('5') == std::string::npos)
        return {false, "unexpected failure: " + what};
      if (notes.empty()) notes = std::string(errc_name(e.code())) + ": " + what;
    }
  }
  return {true, "secret 5 recovered via another subset and reported, with and without server-side checks; two "
                "damaged clouds: \"" + notes.substr(0, 80) + "\""};
}

// 5. Repeated and cross-user uploads of 64MB.
Result two_stage_dedup() {
  testutil::TempDir dir;
  sim::SimCluster cluster(4, dir.path());
  Client alice(cluster.client_config(1, {4, 3}, {}, 2));
  Client bob(cluster.client_config(2, {4, 3}, {}, 2));
  const auto data = testutil::random_bytes(64u << 20, 5);
  const auto first = backup_bytes(alice, data, "/big");
  const auto second = backup_bytes(alice, data, "/big.copy");
  const double intra = static_cast<double>(second.total_transferred_share_bytes()) /
                       static_cast<double>(first.total_transferred_share_bytes());
  const auto shares_before = share_backend_bytes(cluster);
  const auto all_before = all_backend_bytes(cluster);
  backup_bytes(bob, data, "/big");
  const auto shares_added = share_backend_bytes(cluster) - shares_before;
  const auto all_added = all_backend_bytes(cluster) - all_before;
  const double inter = static_cast<double>(shares_added) / static_cast<double>(shares_before);
  return {intra < 0.01 && inter < 0.01,
          fmt("repeat upload sent %.4f%% of first; second user added %.4f%% physical share bytes "
              "(file recipes add %.2f%% of backend bytes)",
              100 * intra, 100 * inter, 100.0 * static_cast<double>(all_added) / static_cast<double>(all_before))};
}

// 6. FP_REPLY frames to one user do not depend on another user's uploads.
Result side_channel() {
  const auto x = testutil::random_bytes(3u << 20, 6);
  const auto y = testutil::random_bytes(1u << 20, 7);
  auto run = [&](bool bob_first) {
    testutil::TempDir dir;
    sim::SimCluster cluster(4, dir.path());
    if (bob_first) {
      Client bob(cluster.client_config(2, {4, 3}, {}));
      backup_bytes(bob, x, "/x");
      backup_bytes(bob, y, "/y");
    }
    Client alice(cluster.client_config(1, {4, 3}, {}));
    std::map<int, Bytes> frames;
    std::mutex mu;
    alice.set_frame_tap([&](int cloud, const proto::Message& m) {
      if (m.type != proto::MessageType::fp_reply) return;
      const auto wire = proto::encode_message(m);
      std::lock_guard lock(mu);
      frames[cloud].insert(frames[cloud].end(), wire.begin(), wire.end());
    });
    backup_bytes(alice, x, "/x");
    backup_bytes(alice, y, "/y");
    backup_bytes(alice, x, "/x2");
    return frames;
  };
  const auto alone = run(false);
  const auto after_bob = run(true);
  std::size_t bytes = 0;
  for (const auto& [_, f] : alone) bytes += f.size();
  return {alone == after_bob && !alone.empty(),
          fmt("%zu bytes of FP_REPLY frames across 4 clouds compared bit for bit", bytes)};
}

// 7. Physical share bytes over logical bytes for unique data.
Result storage_blowup() {
  testutil::TempDir dir;
  sim::SimCluster cluster(4, dir.path());
  Client client(cluster.client_config(1, {4, 3}, {}, 2));
  const std::size_t size = 256u << 20;
  {
    const auto data = testutil::random_bytes(size, 8);
    backup_bytes(client, data, "/unique");
  }
  const double ratio = static_cast<double>(share_backend_bytes(cluster)) / static_cast<double>(size);
  const double expect = 4.0 / 3.0 * (1.0 + 32.0 / 8192.0);
  const double err = std::abs(ratio - expect) / expect;
  return {err <= 0.05, fmt("physical/logical = %.5f, expected %.5f (error %.3f%%, limit 5%%)", ratio, expect, 100 * err)};
}

// 8. Encode throughput, single thread and with 2 workers.
Result throughput() {
  const auto data = testutil::random_bytes(64u << 20, 9);
  const auto chunks = chunk_stream(data, ChunkParams{});
  ConvergentDispersal codec({4, 3});
  auto rate = [&](unsigned workers) {
    double best = 0;
    for (int round = 0; round < 3; ++round) {
      const auto t0 = Clock::now();
      std::atomic<std::size_t> sink{0};
      parallel_for(chunks.size(), workers, [&](std::size_t i) { sink += codec.encode(chunks[i])[0].data.size(); });
      best = std::max(best, static_cast<double>(data.size()) / (1 << 20) / seconds_since(t0));
    }
    return best;
  };
  const double one = rate(1);
  const double two = rate(2);
  const unsigned cores = std::thread::hardware_concurrency();
  return {one >= 50 && two >= 1.5 * one,
          fmt("1 worker %.1f MB/s (need 50), 2 workers %.1f MB/s = %.2fx (need 1.5x); %u hardware threads", one, two,
              two / one, cores)};
}

// 9. Cost savings at 16TB weekly, 26 weeks, 10x deduplication.
Result cost_model() {
  const auto pricing = analytics::PricingModel::flat(30.0, {{"vm-165", 165.0, 1e6}});
  const auto r = analytics::estimate_cost(16, 10, 26, {4, 3}, pricing);
  const double ref_vs_single = 1.0 - 3540.0 / 12250.0;
  const double ref_vs_aont = 1.0 - 3540.0 / 16400.0;
  const bool ok = r.saving_vs_single >= 0.70 && r.saving_vs_aont >= 0.70 &&
                  std::abs(r.saving_vs_single - ref_vs_single) <= 0.10 &&
                  std::abs(r.saving_vs_aont - ref_vs_aont) <= 0.10 && std::abs(r.cdstore_vm_usd - 660) < 1e-6;
  return {ok, fmt("saving vs single cloud %.1f%% (reference %.1f%%), vs AONT-RS %.1f%% (reference %.1f%%); "
                  "$%.0f vs $%.0f and $%.0f per month",
                  100 * r.saving_vs_single, 100 * ref_vs_single, 100 * r.saving_vs_aont, 100 * ref_vs_aont,
                  r.cdstore_total_usd, r.single_total_usd, r.aont_total_usd)};
}

// 10. Trace analytics equals a brute-force recount.
Result trace_oracle() {
  std::mt19937_64 rng(10);
  std::size_t chunks_checked = 0;
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<oracle::TraceChunk> chunks;
    const std::uint32_t users = 2 + static_cast<std::uint32_t>(rng() % 8);
    const std::uint32_t epochs = 2 + static_cast<std::uint32_t>(rng() % 8);
    const std::size_t per = 100000 / (users * epochs);
    for (std::uint32_t u = 0; u < users; ++u)
      for (std::uint32_t e = 0; e < epochs; ++e)
        for (std::size_t i = 0; i < per; ++i) {
          // Mostly shared content, some per-user and per-epoch changes.
          const std::uint64_t fp = rng() % 10 < 7 ? rng() % 20000 : (std::uint64_t{u} << 40) | (rng() % 5000);
          chunks.push_back({u, e, fp, static_cast<std::uint32_t>(2048 + (fp * 2654435761u) % 14337)});
        }
    std::ostringstream text;
    for (const auto& c : chunks) text << c.user << ' ' << c.epoch << ' ' << std::hex << c.fp << std::dec << ' ' << c.size << '\n';
    const CodingParams params{4, 3};
    const auto got = analytics::analyze_trace(analytics::BackupTrace::parse(text.str()), params);
    const auto want = oracle::recount_trace(chunks, params.n, params.k);
    if (got.epochs.size() != want.size()) return {false, "epoch count differs"};
    for (const auto& e : got.epochs) {
      const auto& w = want.at(e.epoch);
      if (e.logical_data != w.logical_data || e.logical_shares != w.logical_shares ||
          e.transferred_shares != w.transferred || e.physical_shares != w.physical)
        return {false, fmt("trial %d epoch %u differs", trial, e.epoch)};
    }
    chunks_checked += chunks.size();
  }
  return {true, fmt("%zu chunks over 3 traces match exactly", chunks_checked)};
}

// 11. Restore after wiping all client-local state.
Result metadata_offloading() {
  testutil::TempDir dir;
  testutil::TempDir client_dir;
  sim::SimCluster cluster(4, dir.path());
  auto cfg = cluster.client_config(1, {4, 3}, {});
  cfg.state_dir = client_dir / "state";
  const auto data = testutil::random_bytes(5u << 20, 11);
  {
    Client client(cfg);
    backup_bytes(client, data, "/home/u/report.bin");
  }
  const bool had_state = std::filesystem::exists(cfg.state_dir);
  std::filesystem::remove_all(client_dir.path());
  Client fresh(cfg);
  const bool ok = restore_bytes(fresh, "/home/u/report.bin") == data;
  return {ok && had_state, "client state directory deleted between backup and restore; restore byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
      {"codec round-trip", codec_round_trip},
      {"determinism", determinism},
      {"fault tolerance", fault_tolerance},
      {"corruption recovery", corruption_recovery},
      {"two-stage dedup", two_stage_dedup},
      {"side-channel independence", side_channel},
      {"storage blowup", storage_blowup},
      {"encode throughput", throughput},
      {"cost model", cost_model},
      {"trace analytics oracle", trace_oracle},
      {"metadata offloading", metadata_offloading},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Result r;
    const auto t0 = Clock::now();
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += !r.pass;
    std::printf("%s AC%-2d %-26s %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", id, criteria[i].first, r.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
