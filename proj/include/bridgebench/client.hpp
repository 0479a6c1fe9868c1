#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bridgebench/clock.hpp"
#include "bridgebench/codec.hpp"
#include "bridgebench/netem.hpp"
#include "bridgebench/topic.hpp"

namespace bridgebench {

struct ClientConfig {
  std::string client_id;
  uint16_t port = 0;
  bool clean_start = true;
  uint16_t keep_alive_s = 60;
  std::optional<std::pair<std::string, std::string>> credentials;
  int connect_attempts = 5;
  double connect_timeout_ms = 2000.0;
  double retry_interval_ms = 1000.0;
  int max_retries = 10;  ///< < 0 = unlimited
  /// Stamp outgoing publishes with "ts_us" (microseconds on the shared run
  /// clock, taken at encode time) and "seq" (per-client counter) user
  /// properties. Gateways enable this; bridges copy stamps verbatim instead.
  bool auto_stamp = false;
  size_t max_packet_size = kMaxPacketSize;
};

struct PublishOutcome {
  bool ok = false;
  std::string error;
  uint64_t seq = 0;          ///< stamped sequence number (auto_stamp only)
  uint8_t qos = 0;
  uint64_t t_publish_us = 0;
  uint64_t t_complete_us = 0;
  uint32_t retries = 0;
  size_t payload_bytes = 0;
};

struct InboundMessage {
  TopicName topic;
  std::vector<uint8_t> payload;
  uint8_t qos = 0;
  bool dup = false;
  bool retain = false;
  std::vector<UserProperty> user_properties;
  uint64_t arrival_us = 0;  ///< run-clock time after emulated link delay
};

using MessageHandler = std::function<void(const InboundMessage&)>;

struct ClientStats {
  std::array<uint64_t, 16> sent{};      ///< frames by packet type
  std::array<uint64_t, 16> received{};  ///< frames by type, after link loss
  uint64_t connects_attempted = 0;
  uint64_t connects_succeeded = 0;
  uint64_t link_dropped_frames = 0;
};

class MqttError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class AuthError : public MqttError {
 public:
  using MqttError::MqttError;
};

/// MQTT 5.0 client whose socket traffic passes through an EmulatedLink:
/// outbound frames are written after the link's delay (or silently dropped),
/// inbound frames are delivered to the dispatch thread the same way. All
/// handlers run on the dispatch thread, which never blocks the scheduler.
class MqttClient {
 public:
  MqttClient(ClientConfig cfg, LinkProfile link_profile, std::string link_id,
             DelayScheduler& scheduler, const RunClock& clock,
             DropTraceLog* trace);
  ~MqttClient();
  MqttClient(const MqttClient&) = delete;
  MqttClient& operator=(const MqttClient&) = delete;

  /// Connect with retry: up to connect_attempts CONNECT/CONNACK exchanges,
  /// each bounded by connect_timeout_ms. Throws AuthError on a CONNACK
  /// refusal and MqttError once attempts are exhausted.
  void connect();

  /// Complete outstanding handshakes' bookkeeping, send DISCONNECT, close.
  /// Pending publishes that have not finished fail with "connection closed".
  void disconnect();

  bool connected() const;

  /// Subscribe and wait for the SUBACK. Throws MqttError on refusal or
  /// timeout. Matching inbound messages are passed to `handler` on the
  /// dispatch thread.
  void subscribe(const std::vector<TopicFilter>& filters, SubscribeOptions opts,
                 MessageHandler handler);

  std::shared_future<PublishOutcome> publish_async(
      const TopicName& topic, std::vector<uint8_t> payload, uint8_t qos,
      std::vector<UserProperty> user_properties = {});

  PublishOutcome publish(const TopicName& topic, std::vector<uint8_t> payload,
                         uint8_t qos,
                         std::vector<UserProperty> user_properties = {});

  ClientStats stats() const;
  const std::string& link_id() const { return link_id_; }
  const ClientConfig& config() const { return cfg_; }

  /// Number of publishes stamped so far (== next "seq" value).
  uint64_t stamped_count() const;

 private:
  struct ConnectionCtx;
  struct Inflight;

  void dispatch_loop();
  void dispatch_enqueue(std::function<void()> fn);
  uint64_t schedule_task(SteadyTime when, std::function<void()> fn);
  void send_frame_locked(const std::shared_ptr<ConnectionCtx>& ctx,
                         std::vector<uint8_t> frame, PacketType type,
                         bool is_connect);
  void reader_loop(std::shared_ptr<ConnectionCtx> ctx);
  void writer_loop(std::shared_ptr<ConnectionCtx> ctx);
  void on_packet(const std::shared_ptr<ConnectionCtx>& ctx, ControlPacket pkt);
  void on_publish(const std::shared_ptr<ConnectionCtx>& ctx, PublishPacket p);
  void on_ack(const std::shared_ptr<ConnectionCtx>& ctx, const AckPacket& p);
  void deliver_to_handlers(PublishPacket msg);
  void fail_pending_locked(const std::string& why);
  void fulfill_locked(uint16_t packet_id, PublishOutcome outcome);
  void retry_check(uint16_t packet_id, uint64_t generation);
  void arm_keepalive_locked();
  void keepalive_tick();
  void close_ctx(std::shared_ptr<ConnectionCtx> ctx);
  /// Blocks (bounded) until frames in the link delay window and the writer
  /// queue have reached the socket, so disconnect cannot cut off sent frames.
  void drain_ctx(const std::shared_ptr<ConnectionCtx>& ctx);
  uint16_t alloc_packet_id_locked();

  ClientConfig cfg_;
  std::string link_id_;
  EmulatedLink link_;
  DelayScheduler& scheduler_;
  const RunClock& clock_;

  /// Cleared at teardown; scheduler tasks check it before touching `this`.
  std::shared_ptr<std::atomic<bool>> alive_;

  mutable std::mutex mu_;
  std::shared_ptr<ConnectionCtx> ctx_;
  bool connected_ = false;
  bool got_connack_ = false;
  uint8_t connack_reason_ = 0;
  std::condition_variable connack_cv_;
  uint64_t generation_ = 0;

  std::map<uint16_t, Inflight> inflight_;
  uint16_t next_packet_id_ = 1;
  std::map<uint16_t, std::promise<SubackPacket>> pending_subacks_;
  std::map<uint16_t, PublishPacket> pending_in_;  ///< inbound QoS 2 barrier
  std::vector<std::pair<std::vector<TopicFilter>, MessageHandler>> handlers_;
  uint64_t seq_counter_ = 0;
  ClientStats stats_;
  SteadyTime last_send_;
  uint64_t keepalive_task_ = 0;

  std::thread dispatch_thread_;
  std::mutex dq_mu_;
  std::condition_variable dq_cv_;
  std::deque<std::function<void()>> dispatch_q_;
  bool dispatch_stop_ = false;
};

}  // namespace bridgebench
