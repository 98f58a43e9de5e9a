#include "dtwarn/messaging.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace dtwarn::msg {

namespace {

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void append_string(std::vector<std::uint8_t>& out, std::string_view s) {
  append_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace

MqttOptions parse_mqtt_url(std::string_view url) {
  MqttOptions opt;
  std::string_view rest = url;
  if (rest.rfind("mqtt://", 0) == 0) rest.remove_prefix(7);
  if (rest.rfind("tcp://", 0) == 0) rest.remove_prefix(6);
  const auto colon = rest.rfind(':');
  if (colon == std::string_view::npos) {
    opt.host = std::string(rest);
  } else {
    opt.host = std::string(rest.substr(0, colon));
    const auto port_sv = rest.substr(colon + 1);
    unsigned port = 0;
    const auto [ptr, ec] = std::from_chars(port_sv.begin(), port_sv.end(), port);
    if (ec != std::errc() || ptr != port_sv.end() || port == 0 || port > 65535)
      throw ConfigError("DT_MQTT_URL", "invalid port in '" + std::string(url) + "'");
    opt.port = static_cast<std::uint16_t>(port);
  }
  if (opt.host.empty()) throw ConfigError("DT_MQTT_URL", "missing host in '" + std::string(url) + "'");
  return opt;
}

std::vector<std::uint8_t> MqttClient::encode_remaining_length(std::size_t n) {
  std::vector<std::uint8_t> out;
  do {
    std::uint8_t digit = n % 128;
    n /= 128;
    if (n > 0) digit |= 0x80;
    out.push_back(digit);
  } while (n > 0);
  return out;
}

std::vector<std::uint8_t> MqttClient::build_connect_packet(std::string_view client_id,
                                                           std::uint16_t keepalive_s) {
  std::vector<std::uint8_t> var;
  append_string(var, "MQTT");
  var.push_back(0x04);  // protocol level 3.1.1
  var.push_back(0x02);  // clean session
  append_u16(var, keepalive_s);
  append_string(var, client_id);

  std::vector<std::uint8_t> pkt{0x10};
  const auto rl = encode_remaining_length(var.size());
  pkt.insert(pkt.end(), rl.begin(), rl.end());
  pkt.insert(pkt.end(), var.begin(), var.end());
  return pkt;
}

std::vector<std::uint8_t> MqttClient::build_publish_packet(std::string_view topic,
                                                           std::string_view payload,
                                                           std::uint16_t packet_id, bool dup) {
  std::vector<std::uint8_t> var;
  append_string(var, topic);
  append_u16(var, packet_id);  // present because QoS 1
  var.insert(var.end(), payload.begin(), payload.end());

  std::uint8_t header = 0x32;  // PUBLISH, QoS 1
  if (dup) header |= 0x08;
  std::vector<std::uint8_t> pkt{header};
  const auto rl = encode_remaining_length(var.size());
  pkt.insert(pkt.end(), rl.begin(), rl.end());
  pkt.insert(pkt.end(), var.begin(), var.end());
  return pkt;
}

std::vector<std::uint8_t> MqttClient::build_disconnect_packet() { return {0xe0, 0x00}; }

MqttClient::MqttClient(const MqttOptions& options) : timeout_ms_(options.timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(options.port);
  if (::getaddrinfo(options.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr)
    throw BrokerUnreachableError("cannot resolve broker host '" + options.host + "'");

  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    timeval tv{timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0)
    throw BrokerUnreachableError("cannot connect to broker " + options.host + ":" + port);
  fd_ = fd;

  const auto connect_pkt = build_connect_packet(options.client_id);
  send_all(connect_pkt.data(), connect_pkt.size());

  std::uint8_t connack[4];
  recv_all(connack, sizeof(connack));
  if (connack[0] != 0x20 || connack[1] != 0x02)
    throw BrokerUnreachableError("unexpected CONNACK header");
  if (connack[3] != 0x00)
    throw BrokerUnreachableError("broker refused connection, return code " +
                                 std::to_string(connack[3]));
}

MqttClient::~MqttClient() {
  try {
    disconnect();
  } catch (...) {
  }
}

Receipt MqttClient::publish(const std::string& topic, std::string_view payload,
                            std::int64_t now_ms) {
  if (fd_ < 0) throw BrokerUnreachableError("client is disconnected");
  if (topic.find('+') != std::string::npos || topic.find('#') != std::string::npos)
    throw ValidationError("topic", "published topics must not contain wildcards");

  const std::uint16_t pid = next_packet_id_++;
  if (next_packet_id_ == 0) next_packet_id_ = 1;
  const auto pkt = build_publish_packet(topic, payload, pid);
  send_all(pkt.data(), pkt.size());

  // QoS 1: wait for the PUBACK carrying our packet id.
  std::uint8_t puback[4];
  recv_all(puback, sizeof(puback));
  if (puback[0] != 0x40 || puback[1] != 0x02)
    throw BrokerUnreachableError("unexpected packet while waiting for PUBACK");
  const std::uint16_t acked = static_cast<std::uint16_t>((puback[2] << 8) | puback[3]);
  if (acked != pid)
    throw BrokerUnreachableError("PUBACK packet id mismatch");

  Receipt r;
  r.timestamp_ms = now_ms;
  r.n_deliveries = 1;
  return r;
}

void MqttClient::disconnect() {
  if (fd_ < 0) return;
  const auto pkt = build_disconnect_packet();
  send_all(pkt.data(), pkt.size());
  ::close(fd_);
  fd_ = -1;
}

void MqttClient::send_all(const std::uint8_t* data, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t k = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
    if (k <= 0) {
      ::close(fd_);
      fd_ = -1;
      throw BrokerUnreachableError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(k);
  }
}

void MqttClient::recv_all(std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd_, data + got, n - got, 0);
    if (k <= 0) {
      ::close(fd_);
      fd_ = -1;
      throw BrokerUnreachableError(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(k);
  }
}

}  // namespace dtwarn::msg
