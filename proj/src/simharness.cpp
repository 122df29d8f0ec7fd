#include "cdstore/simharness.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "cdstore/error.hpp"

namespace cdstore::sim {

namespace {

std::filesystem::path make_temp_dir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::ostringstream name;
    name << "cdstore-sim-" << std::hex << rd() << rd();
    auto dir = std::filesystem::temp_directory_path() / name.str();
    if (std::filesystem::create_directory(dir)) return dir;
  }
  fail(Errc::io, "cannot create a temporary directory");
}

[[noreturn]] void parse_error(int line, const std::string& what) {
  fail(Errc::parse, "scenario line " + std::to_string(line) + ": " + what);
}

template <typename T>
T number(const std::string& s, int line) {
  std::istringstream in(s);
  T v{};
  if (!(in >> v) || !in.eof()) parse_error(line, "bad number '" + s + "'");
  return v;
}

Expect parse_expect(const std::string& word, int line) {
  if (word == "ok") return Expect::ok;
  if (word == "retried") return Expect::ok_retried;
  if (word == "insufficient") return Expect::insufficient_clouds;
  if (word == "unrecoverable") return Expect::unrecoverable;
  if (word == "not-found") return Expect::not_found;
  parse_error(line, "unknown expectation '" + word + "'");
}

const char* expect_name(Expect e) {
  switch (e) {
    case Expect::ok: return "ok";
    case Expect::ok_retried: return "retried";
    case Expect::insufficient_clouds: return "insufficient";
    case Expect::unrecoverable: return "unrecoverable";
    case Expect::not_found: return "not-found";
  }
  return "?";
}

// Maps a failure to the expectation it satisfies; nullopt for anything else.
std::optional<Expect> classify(const Error& e) {
  switch (e.code()) {
    case Errc::insufficient_clouds: return Expect::insufficient_clouds;
    case Errc::all_subsets_failed: return Expect::unrecoverable;
    case Errc::not_found: return Expect::not_found;
    default: return std::nullopt;
  }
}

}  // namespace

SimCluster::SimCluster(int clouds, std::filesystem::path root, Options options) : root_(std::move(root)) {
  require(clouds > 0, "cluster needs at least one cloud");
  for (int i = 0; i < clouds; ++i) {
    ServerConfig cfg;
    cfg.listen = {"127.0.0.1", 0};
    cfg.backend_root = root_ / ("cloud" + std::to_string(i));
    cfg.salt_file = cfg.backend_root / "server.salt";
    cfg.cache_capacity = options.cache_capacity;
    cfg.cloud_index = static_cast<std::uint32_t>(i);
    cfg.verify_on_read = options.verify_on_read;
    cfg.quiet = options.quiet;
    servers_.push_back(std::make_unique<Server>(std::move(cfg)));
    servers_.back()->start();
  }
}

SimCluster::~SimCluster() {
  for (auto& s : servers_) s->stop();
}

std::vector<net::Endpoint> SimCluster::endpoints() const {
  std::vector<net::Endpoint> out;
  for (const auto& s : servers_) out.push_back(s->endpoint());
  return out;
}

void SimCluster::stop(int cloud) { server(cloud).stop(); }
void SimCluster::start(int cloud) { server(cloud).start(); }

ClientConfig SimCluster::client_config(UserId user, const CodingParams& params, const ChunkParams& chunking,
                                       unsigned workers) const {
  ClientConfig cfg;
  cfg.user = user;
  cfg.clouds = endpoints();
  cfg.params = params;
  cfg.chunking = chunking;
  cfg.workers = workers;
  return cfg;
}

void SimCluster::corrupt_share(int cloud, UserId user, const std::string& pathname, std::uint64_t sequence,
                               const CodingParams& params) {
  auto& srv = server(cloud);
  const auto record = share_pathname(pathname, params);
  srv.flush();
  const ContainerRef ref =
      srv.locate_share(user, record.shares.at(static_cast<std::size_t>(cloud)).data, sequence);
  const auto path = srv.container_path(ref.container);
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  if (!f) fail(Errc::io, "cannot open container " + path.string());
  const std::streamoff at = static_cast<std::streamoff>(ref.offset) + ref.length / 2;
  f.seekg(at);
  char byte = 0;
  f.read(&byte, 1);
  byte = static_cast<char>(byte ^ 0x01);
  f.seekp(at);
  f.write(&byte, 1);
  if (!f) fail(Errc::io, "cannot rewrite container " + path.string());
  f.close();
  srv.drop_cache();
}

std::uint64_t SimCluster::physical_share_bytes() {
  std::uint64_t total = 0;
  for (auto& s : servers_) total += s->stats().physical_share_bytes;
  return total;
}

Scenario Scenario::parse(std::string_view text) {
  Scenario sc;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  std::map<std::string, bool> known;
  auto need_file = [&](const std::string& name, int l) {
    if (!known.count(name)) parse_error(l, "unknown file '" + name + "'");
  };
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream fields(raw);
    std::vector<std::string> w;
    for (std::string t; fields >> t;) w.push_back(t);
    if (w.empty()) continue;
    const std::string& op = w[0];
    auto arity = [&](std::size_t lo, std::size_t hi) {
      if (w.size() < lo || w.size() > hi) parse_error(line, "wrong number of arguments to '" + op + "'");
    };
    auto expectation = [&](std::size_t at) {
      if (w.size() == at) return Expect::ok;
      if (w.size() != at + 2 || w[at] != "expect") parse_error(line, "expected 'expect <outcome>'");
      return parse_expect(w[at + 1], line);
    };
    if (op == "n") {
      arity(2, 2);
      sc.params.n = number<int>(w[1], line);
    } else if (op == "k") {
      arity(2, 2);
      sc.params.k = number<int>(w[1], line);
    } else if (op == "seed") {
      arity(2, 2);
      sc.seed = number<std::uint64_t>(w[1], line);
    } else if (op == "chunking") {
      arity(2, 3);
      if (w[1] == "variable" && w.size() == 2) {
        sc.chunking = ChunkParams{};
      } else if (w[1] == "fixed" && w.size() == 3) {
        sc.chunking = ChunkParams::fixed_chunks(number<std::size_t>(w[2], line));
      } else {
        parse_error(line, "chunking must be 'variable' or 'fixed <size>'");
      }
    } else if (op == "verify_on_read") {
      arity(2, 2);
      if (w[1] != "on" && w[1] != "off") parse_error(line, "verify_on_read must be on or off");
      sc.verify_on_read = w[1] == "on";
    } else if (op == "file") {
      arity(4, 5);
      FileSpec f;
      f.name = w[1];
      if (known.count(f.name)) parse_error(line, "file '" + f.name + "' defined twice");
      if (w[2] == "random" && w.size() == 4) {
        f.kind = FileSpec::Kind::random;
        f.size = number<std::uint64_t>(w[3], line);
      } else if (w[2] == "copy" && w.size() == 4) {
        f.kind = FileSpec::Kind::copy;
        f.source = w[3];
        need_file(f.source, line);
      } else if (w[2] == "mutate" && w.size() == 5) {
        f.kind = FileSpec::Kind::mutate;
        f.source = w[3];
        need_file(f.source, line);
        f.fraction = number<double>(w[4], line);
        if (f.fraction < 0 || f.fraction > 1) parse_error(line, "mutation fraction must lie in [0, 1]");
      } else {
        parse_error(line, "file must be 'random <size>', 'copy <file>' or 'mutate <file> <fraction>'");
      }
      known[f.name] = true;
      sc.files.push_back(std::move(f));
    } else if (op == "backup" || op == "restore") {
      arity(3, 5);
      Step s;
      s.kind = op == "backup" ? Step::Kind::backup : Step::Kind::restore;
      s.line = line;
      s.user = number<UserId>(w[1], line);
      s.file = w[2];
      need_file(s.file, line);
      s.expect = expectation(3);
      if (s.kind == Step::Kind::backup && s.expect != Expect::ok && s.expect != Expect::insufficient_clouds)
        parse_error(line, "backup outcome must be ok or insufficient");
      sc.steps.push_back(std::move(s));
    } else if (op == "stop" || op == "start") {
      arity(2, 2);
      Step s;
      s.kind = op == "stop" ? Step::Kind::stop : Step::Kind::start;
      s.line = line;
      s.cloud = number<int>(w[1], line);
      sc.steps.push_back(std::move(s));
    } else if (op == "corrupt") {
      arity(5, 5);
      Step s;
      s.kind = Step::Kind::corrupt;
      s.line = line;
      s.cloud = number<int>(w[1], line);
      s.user = number<UserId>(w[2], line);
      s.file = w[3];
      need_file(s.file, line);
      s.sequence = number<std::uint64_t>(w[4], line);
      sc.steps.push_back(std::move(s));
    } else {
      parse_error(line, "unknown directive '" + op + "'");
    }
  }
  sc.params.validate();
  sc.chunking.validate();
  for (const auto& s : sc.steps)
    if ((s.kind == Step::Kind::stop || s.kind == Step::Kind::start || s.kind == Step::Kind::corrupt) &&
        (s.cloud < 0 || s.cloud >= sc.params.n))
      parse_error(s.line, "cloud index out of range");
  return sc;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::usage, "cannot read scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::pair<std::string, Bytes>> materialize_files(const Scenario& scenario) {
  std::vector<std::pair<std::string, Bytes>> out;
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < scenario.files.size(); ++i) {
    const auto& f = scenario.files[i];
    std::mt19937_64 rng(scenario.seed * 0x9E3779B97F4A7C15ULL + i);
    Bytes data;
    switch (f.kind) {
      case FileSpec::Kind::random:
        data.resize(f.size);
        for (auto& b : data) b = static_cast<std::uint8_t>(rng());
        break;
      case FileSpec::Kind::copy:
        data = out[at.at(f.source)].second;
        break;
      case FileSpec::Kind::mutate: {
        data = out[at.at(f.source)].second;
        if (!data.empty()) {
          const auto edits = static_cast<std::uint64_t>(f.fraction * static_cast<double>(data.size()));
          std::uniform_int_distribution<std::size_t> pos(0, data.size() - 1);
          for (std::uint64_t e = 0; e < edits; ++e) data[pos(rng)] ^= static_cast<std::uint8_t>(rng() | 1);
        }
        break;
      }
    }
    at[f.name] = out.size();
    out.emplace_back(f.name, std::move(data));
  }
  return out;
}

std::string scenario_pathname(const std::string& file) { return "/sim/" + file; }

bool ScenarioReport::passed() const {
  for (const auto& s : steps)
    if (!s.passed) return false;
  return true;
}

double ScenarioReport::intra_saving() const {
  return logical_shares == 0 ? 0.0 : 1.0 - static_cast<double>(transferred_shares) / logical_shares;
}

double ScenarioReport::inter_saving() const {
  return transferred_shares == 0 ? 0.0 : 1.0 - static_cast<double>(physical_shares) / transferred_shares;
}

ScenarioReport run_scenario(const Scenario& scenario, std::filesystem::path workdir) {
  const bool temporary = workdir.empty();
  if (temporary) workdir = make_temp_dir();
  struct Cleanup {
    std::filesystem::path dir;
    bool active;
    ~Cleanup() {
      std::error_code ec;
      if (active) std::filesystem::remove_all(dir, ec);
    }
  } cleanup{workdir, temporary};

  const auto files = materialize_files(scenario);
  auto content = [&](const std::string& name) -> const Bytes& {
    for (const auto& [n, d] : files)
      if (n == name) return d;
    fail(Errc::usage, "unknown file " + name);
  };

  SimCluster::Options options;
  options.verify_on_read = scenario.verify_on_read;
  ScenarioReport report;
  {
    SimCluster cluster(scenario.params.n, workdir, options);
    for (const auto& step : scenario.steps) {
      StepOutcome out;
      out.line = step.line;
      std::ostringstream desc;
      try {
        switch (step.kind) {
          case Step::Kind::backup:
          case Step::Kind::restore: {
            const bool backup = step.kind == Step::Kind::backup;
            desc << (backup ? "backup " : "restore ") << step.user << ' ' << step.file << " expect "
                 << expect_name(step.expect);
            Client client(cluster.client_config(step.user, scenario.params, scenario.chunking));
            const auto pathname = scenario_pathname(step.file);
            std::optional<Expect> got;
            try {
              if (backup) {
                const Bytes& data = content(step.file);
                std::istringstream in(std::string(data.begin(), data.end()));
                const auto r = client.backup_stream(in, pathname);
                report.logical_data += r.logical_bytes;
                report.logical_shares += r.total_logical_share_bytes();
                report.transferred_shares += r.total_transferred_share_bytes();
                got = Expect::ok;
              } else {
                std::ostringstream sink;
                const auto r = client.restore_stream(pathname, sink);
                const auto s = sink.str();
                const Bytes& want = content(step.file);
                if (s.size() != want.size() || !std::equal(want.begin(), want.end(), s.begin(), [](std::uint8_t a, char b) {
                                                     return a == static_cast<std::uint8_t>(b);
                                                   })) {
                  out.detail = "restored bytes differ from the original";
                } else {
                  got = r.retried_secrets.empty() ? Expect::ok : Expect::ok_retried;
                  if (!r.retried_secrets.empty()) out.detail = std::to_string(r.retried_secrets.size()) + " secrets retried";
                }
              }
            } catch (const Error& e) {
              got = classify(e);
              out.detail = e.what();
            }
            // A plain "ok" restore accepts a recovery that needed retries.
            out.passed = got && (*got == step.expect || (step.expect == Expect::ok && *got == Expect::ok_retried));
            if (got && !out.passed && out.detail.empty()) out.detail = std::string("got ") + expect_name(*got);
            break;
          }
          case Step::Kind::stop:
            desc << "stop " << step.cloud;
            cluster.stop(step.cloud);
            out.passed = true;
            break;
          case Step::Kind::start:
            desc << "start " << step.cloud;
            cluster.start(step.cloud);
            out.passed = true;
            break;
          case Step::Kind::corrupt:
            desc << "corrupt " << step.cloud << ' ' << step.user << ' ' << step.file << ' ' << step.sequence;
            cluster.corrupt_share(step.cloud, step.user, scenario_pathname(step.file), step.sequence,
                                  scenario.params);
            out.passed = true;
            break;
        }
      } catch (const std::exception& e) {
        out.passed = false;
        out.detail = e.what();
      }
      out.description = desc.str();
      report.steps.push_back(std::move(out));
    }
    for (int c = 0; c < cluster.size(); ++c) {
      const auto bytes = cluster.server(c).stats().physical_share_bytes;
      report.physical_per_cloud.push_back(bytes);
      report.physical_shares += bytes;
    }
  }
  return report;
}

std::string format_report(const ScenarioReport& report) {
  std::ostringstream os;
  for (const auto& s : report.steps) {
    os << (s.passed ? "ok   " : "FAIL ") << "line " << s.line << ": " << s.description;
    if (!s.detail.empty()) os << " (" << s.detail << ')';
    os << '\n';
  }
  os << "logical_data\t" << report.logical_data << '\n'
     << "logical_shares\t" << report.logical_shares << '\n'
     << "transferred_shares\t" << report.transferred_shares << '\n'
     << "physical_shares\t" << report.physical_shares << '\n';
  for (std::size_t c = 0; c < report.physical_per_cloud.size(); ++c)
    os << "physical_shares_cloud" << c << '\t' << report.physical_per_cloud[c] << '\n';
  os << std::fixed << std::setprecision(4) << "intra_user_saving\t" << report.intra_saving() << '\n'
     << "inter_user_saving\t" << report.inter_saving() << '\n'
     << "result\t" << (report.passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

}  // namespace cdstore::sim
