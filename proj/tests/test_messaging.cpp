#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dtwarn/messaging.hpp"
#include "helpers.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <random>
#include <set>
#include <thread>

using namespace dtwarn;
using namespace dtwarn::msg;

namespace {

WarningMessage fixture_message() {
  return make_warning("00000000000000000000000000000abc", 1767225602600, "amsterdam-120", "ped0",
                      1.1, {0.25, -3.5}, "veh2", {6.5, 0.0});
}

WarningMessage random_message(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_real_distribution<double> ttc(0.01, 5.0);
  std::uniform_int_distribution<int> idn(0, 500);
  MessageIdGenerator ids(rng());
  return make_warning(ids.next(), static_cast<std::int64_t>(rng() % 4102444800000ull),
                      "x" + std::to_string(idn(rng)), "ped" + std::to_string(idn(rng)), ttc(rng),
                      {coord(rng), coord(rng)}, "veh" + std::to_string(idn(rng)),
                      {coord(rng), coord(rng)});
}

}  // namespace

TEST_CASE("encode_warning: golden fixture bytes") {
  const auto m = fixture_message();
  const std::string expected =
      "{\"version\":1,\"msg_id\":\"00000000000000000000000000000abc\","
      "\"created_ms\":1767225602600,\"intersection\":\"amsterdam-120\",\"user\":\"ped0\","
      "\"kind\":\"collision_warning\",\"ttc_s\":1.1,\"pos_m\":[0.25,-3.5],"
      "\"hazard\":{\"id\":\"veh2\",\"pos_m\":[6.5,0]}}";
  CHECK(encode_warning(m) == expected);
  CHECK(encode_warning(m) == encode_warning(m));  // canonical form is stable
}

TEST_CASE("decode_warning: golden fixture round-trip") {
  const auto m = fixture_message();
  const auto back = decode_warning(encode_warning(m));
  CHECK(back == m);
}

TEST_CASE("decode_warning: accepts re-ordered keys") {
  const std::string shuffled =
      "{\"user\":\"ped0\",\"ttc_s\":1.1,\"version\":1,\"kind\":\"collision_warning\","
      "\"msg_id\":\"00000000000000000000000000000abc\",\"intersection\":\"amsterdam-120\","
      "\"pos_m\":[0.25,-3.5],\"hazard\":{\"pos_m\":[6.5,0],\"id\":\"veh2\"},"
      "\"created_ms\":1767225602600}";
  CHECK(decode_warning(shuffled) == fixture_message());
}

TEST_CASE("decode_warning: error taxonomy") {
  const auto bytes = encode_warning(fixture_message());
  CHECK_THROWS_AS(decode_warning(bytes.substr(0, bytes.size() / 2)), MalformedPayloadError);

  std::string v2 = bytes;
  v2.replace(v2.find("\"version\":1"), 11, "\"version\":2");
  CHECK_THROWS_AS(decode_warning(v2), UnsupportedVersionError);

  std::string bad_ttc = bytes;
  bad_ttc.replace(bad_ttc.find("\"ttc_s\":1.1"), 11, "\"ttc_s\":-1.0");
  CHECK_THROWS_AS(decode_warning(bad_ttc), ValidationError);
}

TEST_CASE("property: encode/decode identity on generated messages") {
  std::mt19937_64 rng(derive_seed(19, "msg-roundtrip"));
  for (int i = 0; i < 300; ++i) {
    const auto m = random_message(rng);
    const auto back = decode_warning(encode_warning(m));
    CHECK(back == m);
  }
}

TEST_CASE("message ids are unique over 1e5 draws and deterministic per run seed") {
  MessageIdGenerator a(42), b(42), c(43);
  std::set<std::string> seen;
  std::string first_a;
  bool all_unique = true;
  for (int i = 0; i < 100000; ++i) {
    const auto id = a.next();
    if (i == 0) first_a = id;
    all_unique = all_unique && seen.insert(id).second;
  }
  CHECK(all_unique);
  CHECK(b.next() == first_a);
  CHECK(c.next() != first_a);
}

TEST_CASE("topic_matches: single-level wildcard semantics") {
  CHECK(topic_matches("dt/x/warn/+", "dt/x/warn/ped0"));
  CHECK_FALSE(topic_matches("dt/x/warn/+", "dt/y/warn/ped0"));
  CHECK_FALSE(topic_matches("dt/x/warn/+", "dt/x/warn/ped0/extra"));
  CHECK(topic_matches("+/+/+/+", "dt/x/warn/ped0"));
  CHECK_FALSE(topic_matches("dt/x/warn", "dt/x/warn/ped0"));
  CHECK(topic_matches("dt/x/warn", "dt/x/warn"));
}

TEST_CASE("property: wildcard matcher agrees with substitution enumeration") {
  // every topic a filter claims to match must be producible by substituting
  // its '+' levels, and vice versa, over all depth <= 3 topics here
  const std::vector<std::string> alphabet = {"a", "b", "intersection", "user"};
  std::vector<std::vector<std::string>> topics;
  for (const auto& l0 : alphabet) {
    topics.push_back({l0});
    for (const auto& l1 : alphabet) {
      topics.push_back({l0, l1});
      for (const auto& l2 : alphabet) topics.push_back({l0, l1, l2});
    }
  }
  const auto join = [](const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "/" : "") + parts[i];
    return s;
  };
  std::vector<std::string> filter_alphabet = alphabet;
  filter_alphabet.push_back("+");
  std::vector<std::vector<std::string>> filters;
  for (const auto& l0 : filter_alphabet) {
    filters.push_back({l0});
    for (const auto& l1 : filter_alphabet) {
      filters.push_back({l0, l1});
      for (const auto& l2 : filter_alphabet) filters.push_back({l0, l1, l2});
    }
  }
  for (const auto& f : filters) {
    for (const auto& t : topics) {
      bool expect = f.size() == t.size();
      if (expect) {
        for (std::size_t i = 0; i < f.size(); ++i) {
          if (f[i] != "+" && f[i] != t[i]) {
            expect = false;
            break;
          }
        }
      }
      CHECK(topic_matches(join(f), join(t)) == expect);
    }
  }
}

TEST_CASE("loopback broker: FIFO per subscriber") {
  LoopbackBroker broker;
  auto q = broker.subscribe("dt/x/warn/+");
  for (int i = 0; i < 100; ++i) {
    broker.publish("dt/x/warn/ped0", std::to_string(i), i);
  }
  for (int i = 0; i < 100; ++i) {
    const auto d = q->try_pop();
    REQUIRE(d.has_value());
    CHECK(d->payload == std::to_string(i));
  }
  CHECK_FALSE(q->try_pop().has_value());
}

TEST_CASE("loopback broker: wildcard subscription scoping") {
  LoopbackBroker broker;
  auto q = broker.subscribe("dt/X/warn/+");
  broker.publish("dt/X/warn/ped0", "a", 0);
  broker.publish("dt/X/warn/ped1", "b", 1);
  broker.publish("dt/Y/warn/ped0", "c", 2);
  CHECK(q->size() == 2);
}

TEST_CASE("loopback broker: receipt without subscribers, wildcard publish rejected") {
  LoopbackBroker broker;
  const auto r = broker.publish("dt/x/warn/ped0", "payload", 123);
  CHECK(r.timestamp_ms == 123);
  CHECK(r.n_deliveries == 0);
  CHECK_THROWS_AS(broker.publish("dt/+/warn/ped0", "p", 0), ValidationError);
}

TEST_CASE("loopback broker: bounded queue raises queue-full") {
  LoopbackBroker broker(8);
  auto q = broker.subscribe("t");
  for (int i = 0; i < 8; ++i) broker.publish("t", "x", 0);
  CHECK_THROWS_AS(broker.publish("t", "x", 0), QueueFullError);
}

TEST_CASE("loopback broker: publisher order survives a consumer thread") {
  LoopbackBroker broker;
  auto q = broker.subscribe("t");
  std::vector<int> seen;
  std::thread consumer([&] {
    while (seen.size() < 500) {
      if (auto d = q->try_pop()) seen.push_back(std::stoi(d->payload));
    }
  });
  for (int i = 0; i < 500; ++i) broker.publish("t", std::to_string(i), i);
  consumer.join();
  for (int i = 0; i < 500; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("retrieval_latency: degenerate and configured models") {
  const std::vector<Receipt> receipts(64);
  const auto constant = retrieval_latency(receipts, {5.0, 0.0}, 1);
  for (double s : constant) CHECK(s == 5.0);

  const std::vector<Receipt> many(10000);
  const auto fiveg = retrieval_latency(many, {39.21, 7.12}, derive_seed(2, "5g"));
  const double mean = testutil::mean(fiveg);
  CHECK(std::abs(mean - 39.21) < 3.0 * 7.12 / 100.0);
}

TEST_CASE("retrieval_latency: network means preserve the configured ordering") {
  const std::vector<Receipt> many(20000);
  const double eth = testutil::mean(retrieval_latency(many, {3.21, 0.315}, 11));
  const double wifi = testutil::mean(retrieval_latency(many, {6.86, 1.19}, 12));
  const double fiveg = testutil::mean(retrieval_latency(many, {39.21, 7.12}, 13));
  const double lte = testutil::mean(retrieval_latency(many, {45.72, 15.30}, 14));
  CHECK(eth < wifi);
  CHECK(wifi < fiveg);
  CHECK(fiveg < lte);
}

TEST_CASE("mqtt: packet builders produce 3.1.1 wire bytes") {
  const auto connect = MqttClient::build_connect_packet("cli", 60);
  const std::vector<std::uint8_t> expected_connect = {
      0x10, 0x0f,                                // CONNECT, remaining length 15
      0x00, 0x04, 'M',  'Q',  'T',  'T',  0x04,  // protocol name + level
      0x02,                                      // clean session
      0x00, 0x3c,                                // keepalive 60
      0x00, 0x03, 'c',  'l',  'i',
  };
  CHECK(connect == expected_connect);

  const auto publish = MqttClient::build_publish_packet("a/b", "hi", 7);
  const std::vector<std::uint8_t> expected_publish = {
      0x32, 0x09,                    // PUBLISH QoS1, remaining length 9
      0x00, 0x03, 'a',  '/',  'b',   // topic
      0x00, 0x07,                    // packet id
      'h',  'i',
  };
  CHECK(publish == expected_publish);

  CHECK(MqttClient::encode_remaining_length(0) == std::vector<std::uint8_t>{0x00});
  CHECK(MqttClient::encode_remaining_length(127) == std::vector<std::uint8_t>{0x7f});
  CHECK(MqttClient::encode_remaining_length(128) == std::vector<std::uint8_t>{0x80, 0x01});
  CHECK(MqttClient::encode_remaining_length(321) == std::vector<std::uint8_t>{0xc1, 0x02});
}

TEST_CASE("mqtt url parsing") {
  auto opt = parse_mqtt_url("mqtt://broker.local:2883");
  CHECK(opt.host == "broker.local");
  CHECK(opt.port == 2883);
  opt = parse_mqtt_url("127.0.0.1");
  CHECK(opt.port == 1883);
  CHECK_THROWS_AS(parse_mqtt_url("host:notaport"), ConfigError);
}

TEST_CASE("mqtt: QoS1 publish against a stub broker socket") {
  // hermetic stub: accepts one client, answers CONNACK and one PUBACK
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(listener >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  REQUIRE(::listen(listener, 1) == 0);
  socklen_t len = sizeof(addr);
  REQUIRE(::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
  const std::uint16_t port = ntohs(addr.sin_port);

  std::thread stub([listener] {
    const int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) return;
    std::uint8_t buf[512];
    // CONNECT in, CONNACK out
    ::recv(conn, buf, sizeof(buf), 0);
    const std::uint8_t connack[] = {0x20, 0x02, 0x00, 0x00};
    ::send(conn, connack, sizeof(connack), 0);
    // PUBLISH in; echo the packet id back in a PUBACK
    const ssize_t n = ::recv(conn, buf, sizeof(buf), 0);
    std::uint8_t pid_hi = 0, pid_lo = 0;
    if (n > 4) {
      const int topic_len = (buf[2] << 8) | buf[3];
      pid_hi = buf[4 + topic_len];
      pid_lo = buf[5 + topic_len];
    }
    const std::uint8_t puback[] = {0x40, 0x02, pid_hi, pid_lo};
    ::send(conn, puback, sizeof(puback), 0);
    ::recv(conn, buf, sizeof(buf), 0);  // DISCONNECT
    ::close(conn);
  });

  MqttOptions opt;
  opt.host = "127.0.0.1";
  opt.port = port;
  opt.timeout_ms = 2000;
  {
    MqttClient client(opt);
    const auto receipt = client.publish("dt/x/warn/ped0", "payload", 99);
    CHECK(receipt.timestamp_ms == 99);
    client.disconnect();
  }
  stub.join();
  ::close(listener);
}

TEST_CASE("make_warning validation") {
  CHECK_THROWS_AS(make_warning("short", 0, "x", "u", 1.0, {0, 0}, "v", {0, 0}), ValidationError);
  CHECK_THROWS_AS(make_warning("00000000000000000000000000000abc", 0, "bad/name", "u", 1.0,
                               {0, 0}, "v", {0, 0}),
                  ValidationError);
  CHECK_THROWS_AS(make_warning("00000000000000000000000000000abc", 0, "x", "u", 0.0, {0, 0}, "v",
                               {0, 0}),
                  ValidationError);
  CHECK_NOTHROW(fixture_message().validate());
}
