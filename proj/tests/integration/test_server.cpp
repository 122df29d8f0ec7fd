#include "doctest.h"

#include <fstream>

#include "cdstore/crypto.hpp"
#include "cdstore/error.hpp"
#include "cdstore/net.hpp"
#include "cdstore/server.hpp"
#include "testutil.hpp"

using namespace cdstore;
using namespace cdstore::proto;

namespace {

ServerConfig config_for(const std::filesystem::path& root, std::uint32_t cloud = 0) {
  ServerConfig cfg;
  cfg.listen = {"127.0.0.1", 0};
  cfg.backend_root = root;
  cfg.salt = testutil::from_string("test-salt");
  cfg.cloud_index = cloud;
  cfg.quiet = true;
  return cfg;
}

Session login(Server& s, UserId user) {
  Session session;
  const auto r = s.handle(session, to_message(Hello{kProtocolVersion, user, s.config().cloud_index}));
  REQUIRE(r.size() == 1);
  REQUIRE(r[0].type == MessageType::ack);
  return session;
}

ShareBatch make_batch(std::uint64_t seed, int count, std::size_t size) {
  ShareBatch b;
  for (int i = 0; i < count; ++i) {
    auto share = testutil::random_bytes(size, seed * 1000 + static_cast<std::uint64_t>(i));
    b.shares.push_back({crypto::sha256(share), static_cast<std::uint64_t>(i), 8192, std::move(share)});
  }
  return b;
}

FileMeta meta_for(const ShareBatch& b, const std::string& path) {
  FileMeta m;
  m.pathname_share = testutil::from_string(path);
  m.pathname_size = static_cast<std::uint32_t>(path.size());
  m.file_size = 8192 * b.shares.size();
  for (const auto& s : b.shares) m.secrets.push_back({s.client_fp, 8192});
  return m;
}

Message one(std::vector<Message> replies) {
  REQUIRE(replies.size() == 1);
  return replies[0];
}

Errc error_code(const Message& m) {
  REQUIRE(m.type == MessageType::error);
  return static_cast<Errc>(parse_error(m).code);
}

std::uint64_t share_container_bytes(Server& s) {
  s.flush();
  std::uint64_t total = 0;
  for (const auto& entry : std::filesystem::directory_iterator(s.config().backend_root / "containers")) {
    std::ifstream in(entry.path(), std::ios::binary);
    Bytes image((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (parse_container(image).kind == ContainerKind::share) total += image.size();
  }
  return total;
}

}  // namespace

TEST_SUITE("server") {
  TEST_CASE("requests before HELLO and mismatched clouds are refused") {
    testutil::TempDir dir;
    Server s(config_for(dir.path(), 2));
    Session session;
    CHECK(error_code(one(s.handle(session, to_message(FpQuery{})))) == Errc::protocol);
    CHECK(error_code(one(s.handle(session, to_message(Hello{kProtocolVersion, 1, 0})))) == Errc::usage);
    CHECK(error_code(one(s.handle(session, to_message(Hello{99, 1, 2})))) == Errc::protocol);
    CHECK(one(s.handle(session, to_message(Hello{kProtocolVersion, 1, 2}))).type == MessageType::ack);
  }

  TEST_CASE("a batch of new shares stores exactly its share bytes") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    const auto batch = make_batch(1, 20, 2742);
    CHECK(parse_ack(one(s.handle(session, to_message(batch)))).value == 20);
    CHECK(s.stats().physical_share_bytes == 20 * 2742);
    CHECK(s.stats().unique_shares == 20);
  }

  TEST_CASE("replaying a batch changes nothing") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    const auto batch = make_batch(2, 10, 1000);
    s.handle(session, to_message(batch));
    s.handle(session, to_message(meta_for(batch, "/f")));
    const auto bytes = share_container_bytes(s);
    const auto fp0 = s.index().server_fingerprint(batch.shares[0].share);
    const auto owners = s.index().find_share(fp0)->owners;

    CHECK(one(s.handle(session, to_message(batch))).type == MessageType::ack);
    CHECK(share_container_bytes(s) == bytes);
    CHECK(s.index().find_share(fp0)->owners == owners);
    CHECK(owners.at(1) == 1);
  }

  TEST_CASE("a second user's duplicate batch adds an owner, not bytes") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto bob = login(s, 2);
    const auto batch = make_batch(3, 8, 500);
    s.handle(bob, to_message(batch));
    s.handle(bob, to_message(meta_for(batch, "/b")));
    const auto bytes = share_container_bytes(s);

    auto alice = login(s, 1);
    // Alice's own query says nothing about Bob's shares.
    FpQuery q;
    for (const auto& sh : batch.shares) q.fingerprints.push_back(sh.client_fp);
    CHECK(parse_fp_reply(one(s.handle(alice, to_message(q)))).duplicate == std::vector<bool>(8, false));
    s.handle(alice, to_message(batch));
    CHECK(one(s.handle(alice, to_message(meta_for(batch, "/a")))).type == MessageType::ack);
    CHECK(share_container_bytes(s) == bytes);
    const auto owners = s.index().find_share(s.index().server_fingerprint(batch.shares[3].share))->owners;
    CHECK(owners == std::map<UserId, std::uint32_t>{{1, 1}, {2, 1}});
    CHECK(parse_fp_reply(one(s.handle(alice, to_message(q)))).duplicate == std::vector<bool>(8, true));
  }

  TEST_CASE("shares must match their client fingerprint") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    auto batch = make_batch(4, 2, 100);
    batch.shares[1].share[0] ^= 1;
    CHECK(error_code(one(s.handle(session, to_message(batch)))) == Errc::protocol);
    CHECK(s.stats().unique_shares == 0);
  }

  TEST_CASE("file metadata naming unknown shares is rejected without side effects") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    const auto batch = make_batch(5, 3, 100);
    ShareBatch partial{{batch.shares[0], batch.shares[1]}};
    s.handle(session, to_message(partial));
    CHECK(error_code(one(s.handle(session, to_message(meta_for(batch, "/f"))))) == Errc::not_found);
    CHECK(s.stats().files == 0);
    CHECK(s.index().user_link(1, batch.shares[0].client_fp)->pending);
  }

  TEST_CASE("download returns the recipe and shares in order") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    const auto batch = make_batch(6, 5, 300);
    s.handle(session, to_message(batch));
    s.handle(session, to_message(meta_for(batch, "/f")));
    const auto replies = s.handle(session, to_message(DownloadReq{testutil::from_string("/f")}));
    REQUIRE(replies.size() == 2);
    const auto recipe = parse_recipe_reply(replies[0]);
    CHECK(recipe.secret_sizes.size() == 5);
    const auto shares = parse_share_reply(replies[1]);
    CHECK(shares.first_sequence == 0);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(shares.shares[i].status == ShareStatus::ok);
      CHECK(shares.shares[i].data == batch.shares[i].share);
    }
    CHECK(error_code(one(s.handle(session, to_message(DownloadReq{testutil::from_string("/nope")})))) ==
          Errc::not_found);
    auto other = login(s, 2);
    CHECK(error_code(one(s.handle(other, to_message(DownloadReq{testutil::from_string("/f")})))) == Errc::not_found);
  }

  TEST_CASE("large downloads are split into bounded share replies") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    ShareBatch all = make_batch(7, 800, 16000);
    for (std::size_t at = 0; at < all.shares.size(); at += 200)
      s.handle(session, to_message(ShareBatch{{all.shares.begin() + at, all.shares.begin() + at + 200}}));
    s.handle(session, to_message(meta_for(all, "/big")));
    const auto replies = s.handle(session, to_message(DownloadReq{testutil::from_string("/big")}));
    REQUIRE(replies.size() > 3);
    std::uint64_t next = 0;
    for (std::size_t i = 1; i < replies.size(); ++i) {
      CHECK(replies[i].payload.size() <= kBatchBytes);
      const auto r = parse_share_reply(replies[i]);
      CHECK(r.first_sequence == next);
      next += r.shares.size();
    }
    CHECK(next == 800);
  }

  TEST_CASE("corrupted stored shares are flagged on download") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    const auto batch = make_batch(8, 4, 300);
    s.handle(session, to_message(batch));
    s.handle(session, to_message(meta_for(batch, "/f")));
    s.flush();
    const auto ref = s.locate_share(1, testutil::from_string("/f"), 2);
    {
      std::fstream f(s.container_path(ref.container), std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(ref.offset + 7);
      f.put('\x00');
      f.seekp(ref.offset + 8);
      f.put('\xff');
    }
    s.drop_cache();
    const auto replies = s.handle(session, to_message(DownloadReq{testutil::from_string("/f")}));
    const auto shares = parse_share_reply(replies.at(1));
    CHECK(shares.shares[1].status == ShareStatus::ok);
    CHECK(shares.shares[2].status == ShareStatus::corrupt);
    CHECK(shares.shares[2].data.empty());
  }

  TEST_CASE("acknowledged and flushed state survives a restart") {
    testutil::TempDir dir;
    const auto batch = make_batch(9, 6, 700);
    {
      auto keep = std::make_unique<Server>(config_for(dir.path()));
      auto session = login(*keep, 1);
      keep->handle(session, to_message(batch));
      CHECK(one(keep->handle(session, to_message(meta_for(batch, "/f")))).type == MessageType::ack);
      keep->flush();
      // A second instance opened now sees what a restarted process would.
      Server restarted(config_for(dir.path()));
      auto again = login(restarted, 1);
      const auto replies = restarted.handle(again, to_message(DownloadReq{testutil::from_string("/f")}));
      REQUIRE(replies.size() == 2);
      const auto shares = parse_share_reply(replies[1]);
      for (std::size_t i = 0; i < 6; ++i) CHECK(shares.shares[i].data == batch.shares[i].share);
      keep.release();  // simulate a crash: no destructor, no further flush
    }
  }

  TEST_CASE("container ids continue after a restart") {
    testutil::TempDir dir;
    ContainerRef first, second;
    {
      Server s(config_for(dir.path()));
      auto session = login(s, 1);
      const auto b = make_batch(10, 1, 100);
      s.handle(session, to_message(b));
      s.handle(session, to_message(meta_for(b, "/a")));
      first = s.locate_share(1, testutil::from_string("/a"), 0);
    }
    Server s(config_for(dir.path()));
    auto session = login(s, 1);
    const auto b = make_batch(11, 1, 100);
    s.handle(session, to_message(b));
    s.handle(session, to_message(meta_for(b, "/b")));
    second = s.locate_share(1, testutil::from_string("/b"), 0);
    CHECK(second.container > first.container);
    CHECK(s.locate_share(1, testutil::from_string("/a"), 0) == first);
  }

  TEST_CASE("salt file is created once and reused") {
    testutil::TempDir dir;
    auto cfg = config_for(dir.path());
    cfg.salt.clear();
    cfg.salt_file = dir / "salt.bin";
    Digest fp1, fp2;
    {
      Server s(cfg);
      fp1 = s.index().server_fingerprint(Bytes{1, 2, 3});
    }
    CHECK(std::filesystem::file_size(dir / "salt.bin") == 32);
    Server s(cfg);
    fp2 = s.index().server_fingerprint(Bytes{1, 2, 3});
    CHECK(fp1 == fp2);
  }

  TEST_CASE("sessions over TCP") {
    testutil::TempDir dir;
    Server s(config_for(dir.path()));
    s.start();
    {
      net::MessageChannel ch(net::TcpConnection::connect(s.endpoint()));
      ch.send(to_message(Hello{kProtocolVersion, 3, 0}));
      CHECK(ch.expect().type == MessageType::ack);
      const auto batch = make_batch(12, 3, 50);
      ch.send(to_message(batch));
      CHECK(ch.expect().type == MessageType::ack);
      ch.send(to_message(meta_for(batch, "/t")));
      CHECK(ch.expect().type == MessageType::ack);
    }
    {
      // A malformed frame ends the session after one ERROR.
      auto conn = net::TcpConnection::connect(s.endpoint());
      const Bytes junk{0x63, 1, 0, 0, 0, 0};
      conn->send_all(junk);
      net::MessageChannel ch(std::move(conn));
      const auto reply = ch.receive();
      REQUIRE(reply);
      CHECK(reply->type == MessageType::error);
      CHECK_FALSE(ch.receive());
    }
    s.stop();
    CHECK(s.stats().files == 1);
  }
}
