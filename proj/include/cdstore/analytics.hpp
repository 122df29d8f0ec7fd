#pragma once

// Offline analyses: deduplication efficiency over backup traces, and the
// monthly cost of a deduplicated multi-cloud store against an AONT-RS
// multi-cloud baseline and a single-cloud baseline.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdstore/rs_codec.hpp"
#include "cdstore/types.hpp"

namespace cdstore::analytics {

struct TraceRecord {
  UserId user = 0;
  std::uint32_t epoch = 0;
  std::uint64_t fingerprint = 0;
  std::uint32_t size = 0;
};

/// Line-oriented text, one chunk per line:
///   <user> <epoch> <fingerprint hex, colons allowed> <size in bytes>
/// Blank lines and lines starting with '#' are ignored.
struct BackupTrace {
  std::vector<TraceRecord> records;

  /// Throws a parse error naming the line number.
  static BackupTrace parse(std::string_view text);
  static BackupTrace load(const std::filesystem::path& path);
};

struct EpochStats {
  std::uint32_t epoch = 0;
  std::uint64_t chunks = 0;
  std::uint64_t logical_data = 0;
  std::uint64_t logical_shares = 0;
  std::uint64_t transferred_shares = 0;
  std::uint64_t physical_shares = 0;

  /// 1 - transferred / logical shares.
  double intra_saving() const;
  /// 1 - physical / transferred shares.
  double inter_saving() const;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TraceAnalysis {
  std::vector<EpochStats> epochs;
  EpochStats total;
};

/// Records are processed in stable epoch order. A chunk's shares are
/// transferred the first time its user backs it up and stored physically the
/// first time any user does. Chunk identity is (fingerprint, size).
TraceAnalysis analyze_trace(const BackupTrace& trace, const CodingParams& params);

std::string format_analysis(const TraceAnalysis& analysis);

struct StorageTier {
  /// Cumulative upper bound of the tier in TB; infinity for the last tier.
  double upto_tb = 0;
  double usd_per_tb_month = 0;
};

struct VmInstance {
  std::string name;
  double usd_per_month = 0;
  /// Local storage available for the file and share indices.
  double index_capacity_gb = 0;
};

/// Pricing text format:
///   storage_tier <upto TB | inf> <USD per TB-month>
///   instance <name> <USD per month> <index capacity GB>
///   index_entry_bytes <bytes>
///   avg_secret_bytes <bytes>
///   recipe_overhead_fraction <fraction of logical data>
struct PricingModel {
  std::vector<StorageTier> storage_tiers;
  std::vector<VmInstance> instances;
  double index_entry_bytes = 64;
  double avg_secret_bytes = 8192;
  /// Unset: n * 32 / avg_secret_bytes (one fingerprint per secret per cloud).
  std::optional<double> recipe_overhead_fraction;

  /// Monthly price of `tb` stored in one account under the tier schedule.
  double storage_cost(double tb) const;
  double recipe_fraction(const CodingParams& params) const;

  void validate() const;

  static PricingModel flat(double usd_per_tb_month, std::vector<VmInstance> instances);
  static PricingModel parse(std::string_view text);
  static PricingModel load(const std::filesystem::path& path);
};

struct CostReport {
  double logical_tb = 0;
  double single_stored_tb = 0;
  double aont_stored_tb = 0;
  double cdstore_share_tb = 0;
  double cdstore_recipe_tb = 0;

  double single_storage_usd = 0;
  double aont_storage_usd = 0;
  double cdstore_storage_usd = 0;
  double cdstore_vm_usd = 0;
  std::string vm_instance;
  double index_gb_per_cloud = 0;

  double single_total_usd = 0;
  double aont_total_usd = 0;
  double cdstore_total_usd = 0;

  double saving_vs_aont = 0;
  double saving_vs_single = 0;
};

/// Monthly cost at steady state with `retention_weeks` weekly backups of
/// `weekly_tb` each (1 TB = 10^12 bytes). Multi-cloud storage is priced per
/// cloud account. Throws a capacity error when no instance can hold the
/// per-cloud index.
CostReport estimate_cost(double weekly_tb, double dedup_ratio, int retention_weeks, const CodingParams& params,
                         const PricingModel& pricing);

std::string format_cost(const CostReport& report);

}  // namespace cdstore::analytics
