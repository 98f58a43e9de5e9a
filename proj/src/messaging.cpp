#include "dtwarn/messaging.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdio>
#include <random>

namespace dtwarn::msg {

namespace {

bool valid_topic_level(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == '/' || c == '+' || c == '#') return false;
  }
  return true;
}

}  // namespace

void WarningMessage::validate() const {
  if (version != kWireVersion)
    throw ValidationError("version", "must be " + std::to_string(kWireVersion));
  if (msg_id.size() != 32) throw ValidationError("msg_id", "must be 32 hex chars");
  for (char c : msg_id) {
    if (!std::isxdigit(static_cast<unsigned char>(c)) ||
        (std::isalpha(static_cast<unsigned char>(c)) && !std::islower(static_cast<unsigned char>(c))))
      throw ValidationError("msg_id", "must be lowercase hex");
  }
  if (!valid_topic_level(intersection))
    throw ValidationError("intersection", "must be non-empty, without '/', '+', '#'");
  if (!valid_topic_level(user)) throw ValidationError("user", "must be non-empty, without '/', '+', '#'");
  if (kind != "collision_warning") throw ValidationError("kind", "unknown message kind '" + kind + "'");
  if (!(ttc_s > 0.0)) throw ValidationError("ttc_s", "must be > 0");
  if (created_ms < 0) throw ValidationError("created_ms", "must be >= 0");
}

WarningMessage make_warning(std::string msg_id, std::int64_t created_ms, std::string intersection,
                            std::string user, double ttc_s, const Vec2& position,
                            std::string hazard_id, const Vec2& hazard_position) {
  WarningMessage m;
  m.msg_id = std::move(msg_id);
  m.created_ms = created_ms;
  m.intersection = std::move(intersection);
  m.user = std::move(user);
  m.ttc_s = quantize_sig6(ttc_s);
  m.position = Vec2(quantize_sig6(position.x()), quantize_sig6(position.y()));
  m.hazard_id = std::move(hazard_id);
  m.hazard_position = Vec2(quantize_sig6(hazard_position.x()), quantize_sig6(hazard_position.y()));
  m.validate();
  return m;
}

std::string topic_for(const WarningMessage& m) {
  return "dt/" + m.intersection + "/warn/" + m.user;
}

std::string encode_warning(const WarningMessage& m) {
  m.validate();
  // Canonical form: fixed key order, %.6g floats, no whitespace. Strings pass
  // through nlohmann's JSON escaping.
  const auto esc = [](const std::string& s) { return nlohmann::json(s).dump(); };
  std::string out;
  out.reserve(256);
  out += "{\"version\":" + std::to_string(m.version);
  out += ",\"msg_id\":" + esc(m.msg_id);
  out += ",\"created_ms\":" + std::to_string(m.created_ms);
  out += ",\"intersection\":" + esc(m.intersection);
  out += ",\"user\":" + esc(m.user);
  out += ",\"kind\":" + esc(m.kind);
  out += ",\"ttc_s\":" + format_sig6(m.ttc_s);
  out += ",\"pos_m\":[" + format_sig6(m.position.x()) + "," + format_sig6(m.position.y()) + "]";
  out += ",\"hazard\":{\"id\":" + esc(m.hazard_id);
  out += ",\"pos_m\":[" + format_sig6(m.hazard_position.x()) + "," +
         format_sig6(m.hazard_position.y()) + "]}}";
  return out;
}

WarningMessage decode_warning(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedPayloadError(std::string("warning payload: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer())
    throw MalformedPayloadError("warning payload: missing integer 'version'");
  const int version = j["version"].get<int>();
  if (version != kWireVersion)
    throw UnsupportedVersionError("unsupported message version " + std::to_string(version));

  WarningMessage m;
  try {
    m.version = version;
    m.msg_id = j.at("msg_id").get<std::string>();
    m.created_ms = j.at("created_ms").get<std::int64_t>();
    m.intersection = j.at("intersection").get<std::string>();
    m.user = j.at("user").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.ttc_s = j.at("ttc_s").get<double>();
    const auto& pos = j.at("pos_m");
    m.position = Vec2(pos.at(0).get<double>(), pos.at(1).get<double>());
    const auto& hz = j.at("hazard");
    m.hazard_id = hz.at("id").get<std::string>();
    const auto& hpos = hz.at("pos_m");
    m.hazard_position = Vec2(hpos.at(0).get<double>(), hpos.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw MalformedPayloadError(std::string("warning payload: ") + e.what());
  }
  m.validate();
  return m;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
  std::size_t fi = 0, ti = 0;
  while (true) {
    const std::size_t fe = filter.find('/', fi);
    const std::size_t te = topic.find('/', ti);
    const std::string_view flevel = filter.substr(fi, fe == std::string_view::npos ? fe : fe - fi);
    const std::string_view tlevel = topic.substr(ti, te == std::string_view::npos ? te : te - ti);
    if (flevel != "+" && flevel != tlevel) return false;
    const bool fdone = fe == std::string_view::npos;
    const bool tdone = te == std::string_view::npos;
    if (fdone || tdone) return fdone && tdone;
    fi = fe + 1;
    ti = te + 1;
  }
}

MessageIdGenerator::MessageIdGenerator(std::uint64_t run_seed)
    : hi_(splitmix64(run_seed ^ fnv1a64("msg-id"))) {}

std::string MessageIdGenerator::next() {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi_),
                static_cast<unsigned long long>(counter_++));
  return buf;
}

std::optional<Delivery> SubscriberQueue::try_pop() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  Delivery d = std::move(q_.front());
  q_.pop_front();
  return d;
}

std::size_t SubscriberQueue::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

void SubscriberQueue::push(Delivery d) {
  std::lock_guard lock(mu_);
  if (q_.size() >= capacity_) throw QueueFullError("subscriber queue full (capacity " +
                                                   std::to_string(capacity_) + ")");
  q_.push_back(std::move(d));
}

LoopbackBroker::LoopbackBroker(std::size_t queue_capacity) : queue_capacity_(queue_capacity) {}

std::shared_ptr<SubscriberQueue> LoopbackBroker::subscribe(std::string topic_filter) {
  auto q = std::make_shared<SubscriberQueue>(queue_capacity_);
  std::lock_guard lock(mu_);
  subs_.push_back({std::move(topic_filter), q});
  return q;
}

Receipt LoopbackBroker::publish(const std::string& topic, std::string payload,
                                std::int64_t now_ms) {
  if (topic.find('+') != std::string::npos || topic.find('#') != std::string::npos)
    throw ValidationError("topic", "published topics must not contain wildcards");
  std::lock_guard lock(mu_);
  Receipt r;
  r.timestamp_ms = now_ms;
  for (auto& sub : subs_) {
    if (topic_matches(sub.filter, topic)) {
      sub.queue->push({topic, payload, now_ms});
      ++r.n_deliveries;
    }
  }
  return r;
}

Receipt publish_warning(const WarningMessage& m, Transport& transport) {
  return transport.publish(topic_for(m), encode_warning(m), m.created_ms);
}

std::vector<double> retrieval_latency(const std::vector<Receipt>& receipts,
                                      const LatencyModel& network_model, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::vector<double> samples;
  samples.reserve(receipts.size());
  for (std::size_t i = 0; i < receipts.size(); ++i) {
    samples.push_back(network_model.sample(rng));
  }
  return samples;
}

}  // namespace dtwarn::msg
