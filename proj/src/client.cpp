#include "cdstore/client.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cdstore/crypto.hpp"
#include "cdstore/error.hpp"
#include "cdstore/parallel.hpp"

namespace cdstore {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_uint(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  fail(Errc::parse, "config line " + std::to_string(line) + ": " + key + " expects an integer");
}

[[noreturn]] void fail_from_reply(int cloud, const proto::Message& m) {
  const auto err = proto::parse_error(m);
  const auto code = err.code <= static_cast<std::uint16_t>(Errc::io) ? static_cast<Errc>(err.code) : Errc::protocol;
  fail(code, "cloud " + std::to_string(cloud) + ": " + err.message);
}

// Encoded secret: one slice and client fingerprint per cloud.
struct EncodedSecret {
  std::uint32_t secret_size = 0;
  std::vector<ShareSlice> shares;
  std::vector<Digest> fingerprints;
};

struct CloudDownload {
  proto::RecipeReply recipe;
  std::vector<proto::ReplyShare> shares;
};

}  // namespace

void ClientConfig::validate() const {
  params.validate();
  chunking.validate();
  if (clouds.size() != static_cast<std::size_t>(params.n))
    fail(Errc::usage, "config lists " + std::to_string(clouds.size()) + " clouds but n = " + std::to_string(params.n));
  if (workers == 0) fail(Errc::usage, "workers must be at least 1");
}

ClientConfig ClientConfig::parse(std::string_view text) {
  ClientConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string l = trim(raw);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos) fail(Errc::parse, "config line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(std::string_view(l).substr(0, eq));
    const std::string value = trim(std::string_view(l).substr(eq + 1));
    if (key == "user") {
      c.user = static_cast<UserId>(parse_uint(value, key, line));
    } else if (key == "n") {
      c.params.n = static_cast<int>(parse_uint(value, key, line));
    } else if (key == "k") {
      c.params.k = static_cast<int>(parse_uint(value, key, line));
    } else if (key == "cloud") {
      c.clouds.push_back(net::Endpoint::parse(value));
    } else if (key == "chunking") {
      if (value == "variable")
        c.chunking.mode = ChunkMode::variable;
      else if (value == "fixed")
        c.chunking.mode = ChunkMode::fixed;
      else
        fail(Errc::parse, "config line " + std::to_string(line) + ": chunking is variable or fixed");
    } else if (key == "chunk_avg") {
      c.chunking.avg = parse_uint(value, key, line);
    } else if (key == "chunk_min") {
      c.chunking.min = parse_uint(value, key, line);
    } else if (key == "chunk_max") {
      c.chunking.max = parse_uint(value, key, line);
    } else if (key == "fixed_size") {
      c.chunking.fixed_size = parse_uint(value, key, line);
    } else if (key == "salt") {
      c.salt = from_hex(value);
    } else if (key == "workers") {
      c.workers = static_cast<unsigned>(parse_uint(value, key, line));
    } else if (key == "state_dir") {
      c.state_dir = value;
    } else {
      fail(Errc::parse, "config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ClientConfig ClientConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::usage, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PathnameRecord share_pathname(std::string_view pathname, const CodingParams& params, ByteView salt) {
  if (pathname.empty()) fail(Errc::usage, "empty pathname");
  PathnameRecord r;
  r.shares = encode_secret(as_bytes(pathname), params, salt);
  r.pathname_size = static_cast<std::uint32_t>(pathname.size());
  return r;
}

std::string recover_pathname(std::span<const ShareSlice> shares, std::size_t pathname_size,
                             const CodingParams& params, ByteView salt) {
  auto out = decode_secret(shares, pathname_size, params, salt);
  return std::string(out.data.begin(), out.data.end());
}

std::uint64_t BackupReport::total_logical_share_bytes() const {
  std::uint64_t t = 0;
  for (auto v : logical_share_bytes) t += v;
  return t;
}

std::uint64_t BackupReport::total_transferred_share_bytes() const {
  std::uint64_t t = 0;
  for (auto v : transferred_share_bytes) t += v;
  return t;
}

double BackupReport::intra_user_saving() const {
  const auto logical = total_logical_share_bytes();
  if (logical == 0) return 0.0;
  return 1.0 - static_cast<double>(total_transferred_share_bytes()) / static_cast<double>(logical);
}

struct Client::CloudLink {
  int cloud = 0;
  net::MessageChannel channel;
  const FrameTap* tap = nullptr;

  CloudLink(int c, std::unique_ptr<net::Connection> conn, const FrameTap* t)
      : cloud(c), channel(std::move(conn)), tap(t) {}

  proto::Message request(const proto::Message& m) {
    channel.send(m);
    return next();
  }

  proto::Message next() {
    proto::Message reply = channel.expect();
    if (tap && *tap) (*tap)(cloud, reply);
    if (reply.type == proto::MessageType::error) fail_from_reply(cloud, reply);
    return reply;
  }
};

Client::Client(ClientConfig config) : config_(std::move(config)), codec_(config_.params, config_.salt) {
  config_.validate();
}

std::unique_ptr<Client::CloudLink> Client::open_link(int cloud) const {
  auto conn = net::TcpConnection::connect(config_.clouds[cloud]);
  auto link = std::make_unique<CloudLink>(cloud, std::move(conn), &tap_);
  proto::Hello hello;
  hello.user = config_.user;
  hello.cloud_index = static_cast<std::uint32_t>(cloud);
  proto::parse_ack(link->request(proto::to_message(hello)));
  return link;
}

BackupReport Client::backup(const std::filesystem::path& file, std::string pathname) {
  if (file.empty()) fail(Errc::usage, "no file given");
  if (std::filesystem::is_directory(file)) fail(Errc::usage, file.string() + " is a directory; archive it first");
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::usage, "cannot open " + file.string());
  if (pathname.empty()) pathname = std::filesystem::absolute(file).lexically_normal().string();
  return backup_stream(in, pathname);
}

BackupReport Client::backup_stream(std::istream& in, const std::string& pathname) {
  const int n = config_.params.n;
  const auto pathname_record = share_pathname(pathname, config_.params, config_.salt);

  // Uploads need every cloud so that share i always lands on cloud i.
  std::vector<std::unique_ptr<CloudLink>> links(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    try {
      links[c] = open_link(c);
    } catch (const Error& e) {
      fail(Errc::insufficient_clouds, "backup needs all " + std::to_string(n) + " clouds; cloud " +
                                          std::to_string(c) + " unavailable: " + e.what());
    }
  }

  BackupReport report;
  report.logical_share_bytes.assign(n, 0);
  report.transferred_share_bytes.assign(n, 0);
  report.duplicate_share_bytes.assign(n, 0);
  report.metadata_bytes.assign(n, 0);

  std::vector<std::vector<proto::SecretMeta>> metas(static_cast<std::size_t>(n));
  std::vector<std::unordered_set<Digest, DigestHash>> known(static_cast<std::size_t>(n));

  StreamChunker chunker(in, config_.chunking);
  const std::size_t group_target = proto::kBatchBytes * static_cast<std::size_t>(config_.params.k);
  std::uint64_t next_seq = 0;

  for (;;) {
    std::vector<Bytes> group;
    std::size_t group_bytes = 0;
    while (group_bytes < group_target) {
      auto chunk = chunker.next();
      if (!chunk) break;
      group_bytes += chunk->size();
      group.push_back(std::move(*chunk));
    }
    if (group.empty()) break;

    std::vector<EncodedSecret> encoded(group.size());
    parallel_for(group.size(), config_.workers, [&](std::size_t i) {
      EncodedSecret& e = encoded[i];
      e.secret_size = static_cast<std::uint32_t>(group[i].size());
      e.shares = codec_.encode(group[i]);
      for (const auto& s : e.shares) e.fingerprints.push_back(crypto::sha256(s.data));
    });
    const std::uint64_t first_seq = next_seq;
    next_seq += group.size();
    report.logical_bytes += group_bytes;

    // One uploader per cloud.
    parallel_for(static_cast<std::size_t>(n), static_cast<unsigned>(n), [&](std::size_t c) {
      CloudLink& link = *links[c];
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < encoded.size(); ++i) {
        const auto size = encoded[i].shares[c].data.size();
        report.logical_share_bytes[c] += size;
        metas[c].push_back({encoded[i].fingerprints[c], encoded[i].secret_size});
        if (known[c].insert(encoded[i].fingerprints[c]).second)
          candidates.push_back(i);
        else
          report.duplicate_share_bytes[c] += size;
      }

      std::size_t pos = 0;
      while (pos < candidates.size()) {
        std::size_t end = pos;
        std::size_t bytes = 4;
        while (end < candidates.size()) {
          const auto sz = proto::batch_entry_size(encoded[candidates[end]].shares[c].data.size());
          if (end > pos && bytes + sz > proto::kBatchBytes) break;
          bytes += sz;
          ++end;
        }
        proto::FpQuery query;
        for (std::size_t j = pos; j < end; ++j) query.fingerprints.push_back(encoded[candidates[j]].fingerprints[c]);
        const auto query_msg = proto::to_message(query);
        report.metadata_bytes[c] += proto::kFrameHeaderSize + query_msg.payload.size();
        const auto flags = proto::parse_fp_reply(link.request(query_msg));
        if (flags.duplicate.size() != end - pos) fail(Errc::protocol, "FP_REPLY length mismatch");

        proto::ShareBatch batch;
        for (std::size_t j = pos; j < end; ++j) {
          const std::size_t i = candidates[j];
          const auto& share = encoded[i].shares[c].data;
          if (flags.duplicate[j - pos]) {
            report.duplicate_share_bytes[c] += share.size();
            continue;
          }
          report.transferred_share_bytes[c] += share.size();
          batch.shares.push_back({encoded[i].fingerprints[c], first_seq + i, encoded[i].secret_size, share});
        }
        if (!batch.shares.empty()) proto::parse_ack(link.request(proto::to_message(batch)));
        pos = end;
      }
    });
    report.secrets += group.size();
  }

  parallel_for(static_cast<std::size_t>(n), static_cast<unsigned>(n), [&](std::size_t c) {
    proto::FileMeta meta;
    meta.pathname_share = pathname_record.shares[c].data;
    meta.pathname_size = pathname_record.pathname_size;
    meta.file_size = report.logical_bytes;
    meta.secrets = std::move(metas[c]);
    const auto msg = proto::to_message(meta);
    report.metadata_bytes[c] += proto::kFrameHeaderSize + msg.payload.size();
    proto::parse_ack(links[c]->request(msg));
  });

  append_history(pathname, report);
  return report;
}

RestoreReport Client::restore(const std::string& pathname, const std::filesystem::path& out) {
  if (out.empty()) fail(Errc::usage, "no output path given");
  std::ofstream os(out, std::ios::binary | std::ios::trunc);
  if (!os) fail(Errc::usage, "cannot write " + out.string());
  auto report = restore_stream(pathname, os);
  os.flush();
  if (!os) fail(Errc::io, "failed writing " + out.string());
  return report;
}

RestoreReport Client::restore_stream(const std::string& pathname, std::ostream& out) {
  const int n = config_.params.n;
  const int k = config_.params.k;
  const auto pathname_record = share_pathname(pathname, config_.params, config_.salt);

  std::map<int, CloudDownload> downloads;
  std::vector<int> order;
  std::vector<std::string> problems;
  int next_cloud = 0;
  bool saw_not_found = false;

  std::mutex problems_mu;
  auto fetch = [&](int c) -> std::optional<CloudDownload> {
    try {
      auto link = open_link(c);
      proto::DownloadReq req{pathname_record.shares[c].data};
      link->channel.send(proto::to_message(req));
      CloudDownload d;
      d.recipe = proto::parse_recipe_reply(link->next());
      while (d.shares.size() < d.recipe.secret_sizes.size()) {
        auto reply = proto::parse_share_reply(link->next());
        if (reply.first_sequence != d.shares.size()) fail(Errc::protocol, "SHARE_REPLY out of order");
        for (auto& s : reply.shares) d.shares.push_back(std::move(s));
      }
      if (d.shares.size() != d.recipe.secret_sizes.size()) fail(Errc::protocol, "SHARE_REPLY count mismatch");
      return d;
    } catch (const Error& e) {
      std::lock_guard lock(problems_mu);
      if (e.code() == Errc::not_found) saw_not_found = true;
      problems.push_back("cloud " + std::to_string(c) + ": " + e.what());
      return std::nullopt;
    }
  };
  auto commit = [&](int c, std::optional<CloudDownload> d) -> bool {
    if (!d) return false;
    if (!downloads.empty()) {
      const auto& ref = downloads.begin()->second.recipe;
      if (ref.file_size != d->recipe.file_size || ref.secret_sizes != d->recipe.secret_sizes) {
        problems.push_back("cloud " + std::to_string(c) + ": recipe disagrees with other clouds");
        return false;
      }
    }
    downloads.emplace(c, std::move(*d));
    order.push_back(c);
    return true;
  };
  auto download_from = [&](int c) { return commit(c, fetch(c)); };

  // The first k clouds are the preferred set, fetched concurrently.
  {
    std::vector<std::optional<CloudDownload>> first(static_cast<std::size_t>(k));
    parallel_for(first.size(), static_cast<unsigned>(k), [&](std::size_t i) { first[i] = fetch(static_cast<int>(i)); });
    for (int c = 0; c < k; ++c) commit(c, std::move(first[c]));
    next_cloud = k;
  }
  while (static_cast<int>(downloads.size()) < k && next_cloud < n) download_from(next_cloud++);
  if (static_cast<int>(downloads.size()) < k) {
    std::string detail;
    for (const auto& p : problems) detail += "; " + p;
    if (saw_not_found && downloads.empty())
      fail(Errc::not_found, "file '" + pathname + "' not found" + detail);
    fail(Errc::insufficient_clouds, "only " + std::to_string(downloads.size()) + " of the required " +
                                        std::to_string(k) + " clouds available" + detail);
  }

  const auto recipe = downloads.begin()->second.recipe;
  const std::size_t count = recipe.secret_sizes.size();
  std::vector<Bytes> secrets(count);
  std::vector<char> retried(count, 0);

  auto try_decode = [&](std::size_t seq) -> bool {
    std::vector<ShareSlice> slices;
    for (const auto& [c, d] : downloads)
      if (d.shares[seq].status == proto::ShareStatus::ok) slices.push_back({c, d.shares[seq].data});
    if (static_cast<int>(slices.size()) < k) return false;
    try {
      auto outcome = codec_.decode(slices, recipe.secret_sizes[seq]);
      if (outcome.attempts > 1) retried[seq] = 1;
      secrets[seq] = std::move(outcome.data);
      return true;
    } catch (const Error& e) {
      if (e.code() == Errc::all_subsets_failed) return false;
      throw;
    }
  };

  std::vector<char> done(count, 0);
  parallel_for(count, config_.workers, [&](std::size_t seq) { done[seq] = try_decode(seq); });
  std::vector<std::uint64_t> failed;
  for (std::size_t seq = 0; seq < count; ++seq)
    if (!done[seq]) failed.push_back(seq);

  // Fetch the same secrets' shares from substitute clouds and retry with
  // every k-subset of what is available.
  while (!failed.empty() && next_cloud < n) {
    if (!download_from(next_cloud++)) continue;
    std::vector<std::uint64_t> still;
    for (auto seq : failed) {
      retried[seq] = 1;
      if (!try_decode(seq)) still.push_back(seq);
    }
    failed.swap(still);
  }
  if (!failed.empty()) {
    std::string seqs;
    for (auto s : failed) seqs += (seqs.empty() ? "" : ", ") + std::to_string(s);
    fail(Errc::all_subsets_failed, "unrecoverable secrets (sequence numbers): " + seqs);
  }

  RestoreReport report;
  report.secrets = count;
  report.clouds_used = order;
  for (std::size_t seq = 0; seq < count; ++seq) {
    out.write(reinterpret_cast<const char*>(secrets[seq].data()), static_cast<std::streamsize>(secrets[seq].size()));
    report.bytes += secrets[seq].size();
    if (retried[seq]) report.retried_secrets.push_back(seq);
  }
  if (report.bytes != recipe.file_size) fail(Errc::corruption, "restored size differs from recorded file size");
  return report;
}

void Client::append_history(const std::string& pathname, const BackupReport& report) const {
  if (config_.state_dir.empty()) return;
  std::filesystem::create_directories(config_.state_dir);
  std::ofstream out(config_.state_dir / "history.tsv", std::ios::app);
  out << std::time(nullptr) << '\t' << pathname << '\t' << report.logical_bytes << '\t' << report.secrets << '\t'
      << report.total_logical_share_bytes() << '\t' << report.total_transferred_share_bytes() << '\n';
}

std::string format_history(const std::filesystem::path& state_dir) {
  std::ifstream in(state_dir / "history.tsv");
  if (!in) return "no local backup history\n";
  std::uint64_t backups = 0, logical = 0, shares = 0, transferred = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string when, path, l, s, ls, t;
    if (!std::getline(fields, when, '\t') || !std::getline(fields, path, '\t') || !std::getline(fields, l, '\t') ||
        !std::getline(fields, s, '\t') || !std::getline(fields, ls, '\t') || !std::getline(fields, t, '\t'))
      continue;
    ++backups;
    logical += std::stoull(l);
    shares += std::stoull(ls);
    transferred += std::stoull(t);
  }
  std::ostringstream os;
  os << "backups\t" << backups << "\nlogical_bytes\t" << logical << "\nlogical_share_bytes\t" << shares
     << "\ntransferred_share_bytes\t" << transferred << "\nintra_user_saving\t"
     << (shares ? 1.0 - static_cast<double>(transferred) / static_cast<double>(shares) : 0.0) << '\n';
  return os.str();
}

}  // namespace cdstore
