#include "cdstore/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cdstore/caont.hpp"
#include "cdstore/error.hpp"

namespace cdstore::analytics {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::usage, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void parse_error(int line, const std::string& what) {
  fail(Errc::parse, "line " + std::to_string(line) + ": " + what);
}

std::uint64_t parse_hex_fingerprint(std::string s, int line) {
  s.erase(std::remove(s.begin(), s.end(), ':'), s.end());
  if (s.empty() || s.size() > 16 || s.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    parse_error(line, "bad fingerprint '" + s + "'");
  return std::stoull(s, nullptr, 16);
}

template <typename T>
T parse_number(const std::string& s, int line, const char* what) {
  std::istringstream in(s);
  T v{};
  if (!(in >> v) || !in.eof()) parse_error(line, std::string("bad ") + what + " '" + s + "'");
  return v;
}

struct ChunkKey {
  std::uint64_t fingerprint;
  std::uint32_t size;
  bool operator==(const ChunkKey&) const = default;
};

struct ChunkKeyHash {
  std::size_t operator()(const ChunkKey& k) const noexcept {
    return std::hash<std::uint64_t>()(k.fingerprint * 0x9E3779B97F4A7C15ULL ^ k.size);
  }
};

struct UserChunkHash {
  std::size_t operator()(const std::pair<UserId, ChunkKey>& k) const noexcept {
    return ChunkKeyHash()(k.second) ^ (static_cast<std::size_t>(k.first) * 0xC2B2AE3D27D4EB4FULL);
  }
};

double ratio_saving(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : 1.0 - static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double EpochStats::intra_saving() const { return ratio_saving(transferred_shares, logical_shares); }
double EpochStats::inter_saving() const { return ratio_saving(physical_shares, transferred_shares); }

BackupTrace BackupTrace::parse(std::string_view text) {
  BackupTrace trace;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  std::unordered_map<UserId, std::uint32_t> last_epoch;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream fields(raw);
    std::string user, epoch, fp, size, extra;
    if (!(fields >> user) || user[0] == '#') continue;
    if (!(fields >> epoch >> fp >> size)) parse_error(line, "expected: user epoch fingerprint size");
    if (fields >> extra) parse_error(line, "trailing fields");
    TraceRecord r;
    r.user = parse_number<UserId>(user, line, "user");
    r.epoch = parse_number<std::uint32_t>(epoch, line, "epoch");
    r.fingerprint = parse_hex_fingerprint(fp, line);
    r.size = parse_number<std::uint32_t>(size, line, "size");
    if (r.size == 0) parse_error(line, "chunk size must be positive");
    auto [it, fresh] = last_epoch.emplace(r.user, r.epoch);
    if (!fresh) {
      if (r.epoch < it->second) parse_error(line, "epoch decreases for user " + std::to_string(r.user));
      it->second = r.epoch;
    }
    trace.records.push_back(r);
  }
  return trace;
}

BackupTrace BackupTrace::load(const std::filesystem::path& path) { return parse(read_file(path)); }

TraceAnalysis analyze_trace(const BackupTrace& trace, const CodingParams& params) {
  params.validate();
  std::vector<const TraceRecord*> ordered;
  ordered.reserve(trace.records.size());
  for (const auto& r : trace.records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const TraceRecord* a, const TraceRecord* b) { return a->epoch < b->epoch; });

  std::unordered_set<std::pair<UserId, ChunkKey>, UserChunkHash> per_user;
  std::unordered_set<ChunkKey, ChunkKeyHash> global;
  TraceAnalysis out;
  for (const TraceRecord* r : ordered) {
    if (out.epochs.empty() || out.epochs.back().epoch != r->epoch) {
      out.epochs.emplace_back();
      out.epochs.back().epoch = r->epoch;
    }
    EpochStats& e = out.epochs.back();
    const std::uint64_t shares = static_cast<std::uint64_t>(params.n) * share_size_for(r->size, params.k);
    ++e.chunks;
    e.logical_data += r->size;
    e.logical_shares += shares;
    const ChunkKey key{r->fingerprint, r->size};
    if (per_user.insert({r->user, key}).second) {
      e.transferred_shares += shares;
      if (global.insert(key).second) e.physical_shares += shares;
    }
  }
  for (const auto& e : out.epochs) {
    out.total.chunks += e.chunks;
    out.total.logical_data += e.logical_data;
    out.total.logical_shares += e.logical_shares;
    out.total.transferred_shares += e.transferred_shares;
    out.total.physical_shares += e.physical_shares;
  }
  return out;
}

std::string format_analysis(const TraceAnalysis& analysis) {
  std::ostringstream os;
  os << "epoch\tchunks\tlogical_data\tlogical_shares\ttransferred_shares\tphysical_shares\tintra_saving\tinter_saving\n";
  auto row = [&](const std::string& label, const EpochStats& e) {
    os << label << '\t' << e.chunks << '\t' << e.logical_data << '\t' << e.logical_shares << '\t'
       << e.transferred_shares << '\t' << e.physical_shares << '\t' << std::fixed << std::setprecision(4)
       << e.intra_saving() << '\t' << e.inter_saving() << '\n';
    os.unsetf(std::ios::fixed);
  };
  for (const auto& e : analysis.epochs) row(std::to_string(e.epoch), e);
  row("total", analysis.total);
  return os.str();
}

double PricingModel::storage_cost(double tb) const {
  double cost = 0;
  double lower = 0;
  for (const auto& tier : storage_tiers) {
    if (tb <= lower) break;
    const double in_tier = std::min(tb, tier.upto_tb) - lower;
    cost += in_tier * tier.usd_per_tb_month;
    lower = tier.upto_tb;
  }
  return cost;
}

double PricingModel::recipe_fraction(const CodingParams& params) const {
  if (recipe_overhead_fraction) return *recipe_overhead_fraction;
  return static_cast<double>(params.n) * static_cast<double>(kDigestSize) / avg_secret_bytes;
}

void PricingModel::validate() const {
  if (storage_tiers.empty()) fail(Errc::usage, "pricing has no storage tiers");
  double prev = 0;
  for (const auto& t : storage_tiers) {
    if (!(t.upto_tb > prev)) fail(Errc::usage, "storage tiers must have increasing bounds");
    if (t.usd_per_tb_month < 0) fail(Errc::usage, "storage prices must be non-negative");
    prev = t.upto_tb;
  }
  if (!std::isinf(storage_tiers.back().upto_tb)) fail(Errc::usage, "last storage tier must be unbounded (inf)");
  for (const auto& i : instances)
    if (i.usd_per_month < 0 || i.index_capacity_gb <= 0) fail(Errc::usage, "bad instance " + i.name);
  if (index_entry_bytes <= 0 || avg_secret_bytes <= 0) fail(Errc::usage, "index and secret sizes must be positive");
}

PricingModel PricingModel::flat(double usd_per_tb_month, std::vector<VmInstance> instances) {
  PricingModel p;
  p.storage_tiers = {{std::numeric_limits<double>::infinity(), usd_per_tb_month}};
  p.instances = std::move(instances);
  return p;
}

PricingModel PricingModel::parse(std::string_view text) {
  PricingModel p;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream fields(raw);
    std::string key;
    if (!(fields >> key) || key[0] == '#') continue;
    std::vector<std::string> args;
    for (std::string a; fields >> a;) {
      if (a[0] == '#') break;
      args.push_back(a);
    }
    auto want = [&](std::size_t count) {
      if (args.size() != count) parse_error(line, key + " expects " + std::to_string(count) + " values");
    };
    if (key == "storage_tier") {
      want(2);
      StorageTier t;
      t.upto_tb = args[0] == "inf" ? std::numeric_limits<double>::infinity()
                                   : parse_number<double>(args[0], line, "tier bound");
      t.usd_per_tb_month = parse_number<double>(args[1], line, "price");
      p.storage_tiers.push_back(t);
    } else if (key == "instance") {
      want(3);
      p.instances.push_back({args[0], parse_number<double>(args[1], line, "price"),
                             parse_number<double>(args[2], line, "capacity")});
    } else if (key == "index_entry_bytes") {
      want(1);
      p.index_entry_bytes = parse_number<double>(args[0], line, "size");
    } else if (key == "avg_secret_bytes") {
      want(1);
      p.avg_secret_bytes = parse_number<double>(args[0], line, "size");
    } else if (key == "recipe_overhead_fraction") {
      want(1);
      p.recipe_overhead_fraction = parse_number<double>(args[0], line, "fraction");
    } else {
      parse_error(line, "unknown key '" + key + "'");
    }
  }
  p.validate();
  return p;
}

PricingModel PricingModel::load(const std::filesystem::path& path) { return parse(read_file(path)); }

CostReport estimate_cost(double weekly_tb, double dedup_ratio, int retention_weeks, const CodingParams& params,
                         const PricingModel& pricing) {
  params.validate();
  pricing.validate();
  require(weekly_tb > 0, "weekly backup size must be positive");
  require(dedup_ratio >= 1.0, "deduplication ratio must be at least 1");
  require(retention_weeks > 0, "retention must be positive");

  const double n = params.n;
  const double k = params.k;
  CostReport r;
  r.logical_tb = weekly_tb * retention_weeks;
  r.single_stored_tb = r.logical_tb;
  r.aont_stored_tb = r.logical_tb * n / k;
  r.cdstore_share_tb = r.aont_stored_tb / dedup_ratio;
  r.cdstore_recipe_tb = r.logical_tb * pricing.recipe_fraction(params);

  r.single_storage_usd = pricing.storage_cost(r.single_stored_tb);
  r.aont_storage_usd = n * pricing.storage_cost(r.aont_stored_tb / n);
  r.cdstore_storage_usd = n * pricing.storage_cost((r.cdstore_share_tb + r.cdstore_recipe_tb) / n);

  // One share index entry per unique secret on every cloud.
  const double unique_secrets = r.logical_tb * 1e12 / dedup_ratio / pricing.avg_secret_bytes;
  r.index_gb_per_cloud = unique_secrets * pricing.index_entry_bytes / 1e9;
  const VmInstance* best = nullptr;
  for (const auto& inst : pricing.instances)
    if (inst.index_capacity_gb >= r.index_gb_per_cloud && (!best || inst.usd_per_month < best->usd_per_month))
      best = &inst;
  if (!best) {
    std::ostringstream msg;
    msg << "no instance can hold a " << r.index_gb_per_cloud << " GB index";
    fail(Errc::capacity, msg.str());
  }
  r.vm_instance = best->name;
  r.cdstore_vm_usd = n * best->usd_per_month;

  r.single_total_usd = r.single_storage_usd;
  r.aont_total_usd = r.aont_storage_usd;
  r.cdstore_total_usd = r.cdstore_storage_usd + r.cdstore_vm_usd;
  r.saving_vs_aont = 1.0 - r.cdstore_total_usd / r.aont_total_usd;
  r.saving_vs_single = 1.0 - r.cdstore_total_usd / r.single_total_usd;
  return r;
}

std::string format_cost(const CostReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "system\tstored_tb\tstorage_usd\tvm_usd\ttotal_usd\n";
  os << "single-cloud\t" << r.single_stored_tb << '\t' << r.single_storage_usd << "\t0.00\t" << r.single_total_usd
     << '\n';
  os << "aont-rs\t" << r.aont_stored_tb << '\t' << r.aont_storage_usd << "\t0.00\t" << r.aont_total_usd << '\n';
  os << "cdstore\t" << r.cdstore_share_tb + r.cdstore_recipe_tb << '\t' << r.cdstore_storage_usd << '\t'
     << r.cdstore_vm_usd << '\t' << r.cdstore_total_usd << '\n';
  os << "vm_instance\t" << r.vm_instance << "\nindex_gb_per_cloud\t" << r.index_gb_per_cloud << '\n';
  os << std::setprecision(4) << "saving_vs_aont_rs\t" << r.saving_vs_aont << "\nsaving_vs_single_cloud\t"
     << r.saving_vs_single << '\n';
  return os.str();
}

}  // namespace cdstore::analytics
