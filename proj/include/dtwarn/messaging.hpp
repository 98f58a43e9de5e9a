#pragma once

#include "dtwarn/core.hpp"
#include "dtwarn/errors.hpp"
#include "dtwarn/latency_model.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtwarn::msg {

inline constexpr int kWireVersion = 1;

/// Safety alert delivered to one road user. Float fields are quantized to
/// six significant digits on construction so the canonical encoding
/// round-trips exactly.
struct WarningMessage {
  int version = kWireVersion;
  std::string msg_id;      // 128-bit id, 32 lowercase hex chars, unique per run
  std::int64_t created_ms = 0;
  std::string intersection;
  std::string user;        // pedestrian id
  std::string kind = "collision_warning";
  double ttc_s = 0.0;      // > 0
  Vec2 position{0.0, 0.0};
  std::string hazard_id;
  Vec2 hazard_position{0.0, 0.0};

  void validate() const;  // throws ValidationError

  bool operator==(const WarningMessage&) const = default;
};

WarningMessage make_warning(std::string msg_id, std::int64_t created_ms, std::string intersection,
                            std::string user, double ttc_s, const Vec2& position,
                            std::string hazard_id, const Vec2& hazard_position);

/// dt/{intersection}/warn/{user}
std::string topic_for(const WarningMessage& m);

struct MalformedPayloadError : Error {
  using Error::Error;
};
struct UnsupportedVersionError : Error {
  using Error::Error;
};

/// Canonical JSON bytes: UTF-8, fixed key order, floats at <= 6 significant
/// digits, no insignificant whitespace. Two encodes of one message are
/// byte-identical.
std::string encode_warning(const WarningMessage& m);

/// Accepts canonical or re-ordered keys; validates version and invariants.
WarningMessage decode_warning(std::string_view bytes);

/// MQTT single-level `+` wildcard match (the only wildcard this system
/// publishes against). Published topics themselves must be wildcard-free.
bool topic_matches(std::string_view filter, std::string_view topic);

/// Deterministic per-run id source: high 64 bits derived from the run seed,
/// low 64 bits a counter, so ids are unique within a run and runs replay
/// byte-identically.
class MessageIdGenerator {
 public:
  explicit MessageIdGenerator(std::uint64_t run_seed);
  std::string next();

 private:
  std::uint64_t hi_;
  std::uint64_t counter_ = 0;
};

struct Receipt {
  std::int64_t timestamp_ms = 0;
  int n_deliveries = 0;
};

struct Delivery {
  std::string topic;
  std::string payload;
  std::int64_t publish_ms = 0;
};

struct QueueFullError : Error {
  using Error::Error;
};

inline constexpr std::size_t kDefaultQueueCapacity = 1024;

class SubscriberQueue {
 public:
  explicit SubscriberQueue(std::size_t capacity) : capacity_(capacity) {}

  std::optional<Delivery> try_pop();
  std::size_t size() const;

  // broker-side
  void push(Delivery d);  // throws QueueFullError

 private:
  mutable std::mutex mu_;
  std::deque<Delivery> q_;
  std::size_t capacity_;
};

/// In-process broker covering the subset this system uses: subscribe with
/// `+` wildcards, publish, per-topic FIFO. Publishes are serialized, so every
/// subscriber observes one publisher's messages in publish order.
class LoopbackBroker {
 public:
  explicit LoopbackBroker(std::size_t queue_capacity = kDefaultQueueCapacity);

  std::shared_ptr<SubscriberQueue> subscribe(std::string topic_filter);
  Receipt publish(const std::string& topic, std::string payload, std::int64_t now_ms);

 private:
  struct Subscription {
    std::string filter;
    std::shared_ptr<SubscriberQueue> queue;
  };

  mutable std::mutex mu_;
  std::vector<Subscription> subs_;
  std::size_t queue_capacity_;
};

/// Synthetic retrieval delay per receipt, sampled from the configured network
/// model, so retrieval statistics are reproducible without a live network.
std::vector<double> retrieval_latency(const std::vector<Receipt>& receipts,
                                      const LatencyModel& network_model, std::uint64_t rng_seed);

/// Publication surface shared by the in-process broker and the external MQTT
/// client; warnings are encoded once and handed to whichever transport the
/// run is configured with.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Receipt publish(const std::string& topic, std::string_view payload,
                          std::int64_t now_ms) = 0;
};

class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(LoopbackBroker& broker) : broker_(broker) {}
  Receipt publish(const std::string& topic, std::string_view payload,
                  std::int64_t now_ms) override {
    return broker_.publish(topic, std::string(payload), now_ms);
  }

 private:
  LoopbackBroker& broker_;
};

Receipt publish_warning(const WarningMessage& m, Transport& transport);

// --- External transport (MQTT 3.1.1, QoS 1) ----------------------------------

struct BrokerUnreachableError : Error {
  using Error::Error;
};

struct MqttOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 1883;
  std::string client_id = "dtwarn";
  int timeout_ms = 5000;
};

/// Parses "mqtt://host:port", "host:port", or "host" (default port 1883).
MqttOptions parse_mqtt_url(std::string_view url);

/// Minimal MQTT 3.1.1 publisher: CONNECT/CONNACK on construction, PUBLISH at
/// QoS 1 with PUBACK confirmation, DISCONNECT on close. Duplicate delivery is
/// acceptable downstream; subscribers de-duplicate by msg_id.
class MqttClient final : public Transport {
 public:
  explicit MqttClient(const MqttOptions& options);
  ~MqttClient() override;

  MqttClient(const MqttClient&) = delete;
  MqttClient& operator=(const MqttClient&) = delete;

  Receipt publish(const std::string& topic, std::string_view payload,
                  std::int64_t now_ms) override;
  void disconnect();

  // Packet builders, exposed for wire-format tests.
  static std::vector<std::uint8_t> encode_remaining_length(std::size_t n);
  static std::vector<std::uint8_t> build_connect_packet(std::string_view client_id,
                                                        std::uint16_t keepalive_s = 60);
  static std::vector<std::uint8_t> build_publish_packet(std::string_view topic,
                                                        std::string_view payload,
                                                        std::uint16_t packet_id, bool dup = false);
  static std::vector<std::uint8_t> build_disconnect_packet();

 private:
  int fd_ = -1;
  int timeout_ms_ = 5000;
  std::uint16_t next_packet_id_ = 1;

  void send_all(const std::uint8_t* data, std::size_t n);
  void recv_all(std::uint8_t* data, std::size_t n);
};

}  // namespace dtwarn::msg
