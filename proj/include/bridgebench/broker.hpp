#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bridgebench/broker_counters.hpp"
#include "bridgebench/codec.hpp"
#include "bridgebench/netem.hpp"
#include "bridgebench/socket.hpp"
#include "bridgebench/topic.hpp"

namespace bridgebench {

struct BrokerConfig {
  std::string name = "broker";
  uint16_t port = 0;  ///< 0 picks an ephemeral port
  /// Pending-message bound per subscriber connection; overflow drops the
  /// message and increments messages_dropped_queue.
  size_t queue_capacity = 1000;
  double retry_interval_ms = 1000.0;
  int max_retries = 10;  ///< retransmissions per message; < 0 = unlimited
  size_t max_packet_size = kMaxPacketSize;
  /// username -> password. Empty map = authentication disabled.
  std::map<std::string, std::string> credentials;
};

/// Standalone MQTT 5.0 broker for the implemented subset: QoS 0-2 routing
/// with the receiver-side QoS 2 barrier (a message travels onward only once
/// its PUBREL arrives), per-subscriber bounded queues, and retransmission of
/// unacknowledged outbound messages.
class Broker {
 public:
  Broker(BrokerConfig cfg, DelayScheduler& scheduler);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  void start();  ///< throws std::runtime_error if the port cannot be bound
  void stop();

  uint16_t port() const { return port_; }
  const std::string& name() const { return cfg_.name; }
  const BrokerConfig& config() const { return cfg_; }

  BrokerCounters counters() const;
  size_t session_count() const;

 private:
  struct Connection;
  struct Session;
  struct SubRecord {
    std::weak_ptr<Session> session;
    SubscribeOptions opts;
  };

  void accept_loop();
  void reader_loop(std::shared_ptr<Connection> conn);
  void writer_loop(std::shared_ptr<Connection> conn);
  void handle_packet(const std::shared_ptr<Connection>& conn, ControlPacket pkt);
  void handle_connect(const std::shared_ptr<Connection>& conn, ConnectPacket p);
  void handle_publish(const std::shared_ptr<Connection>& conn, PublishPacket p);
  void handle_subscribe(const std::shared_ptr<Connection>& conn, SubscribePacket p);
  void handle_unsubscribe(const std::shared_ptr<Connection>& conn, UnsubscribePacket p);
  void handle_ack(const std::shared_ptr<Connection>& conn, AckPacket p);
  void route_locked(const PublishPacket& msg, const std::shared_ptr<Session>& publisher);
  void deliver_locked(const std::shared_ptr<Session>& target, PublishPacket msg);
  void sweep_tick();
  void retransmit_sweep();
  void reap_dead_connections();
  void remove_session_locked(const std::shared_ptr<Session>& sess);
  void drop_connection_locked(const std::shared_ptr<Connection>& conn);

  BrokerConfig cfg_;
  DelayScheduler& scheduler_;
  TcpListener listener_;
  uint16_t port_ = 0;
  std::thread accept_thread_;
  std::atomic<bool> running_{false};
  uint64_t sweep_task_ = 0;

  mutable std::mutex mu_;
  BrokerCounters counters_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  SubscriptionTrie<uint64_t> subscriptions_;
  std::unordered_map<uint64_t, SubRecord> sub_records_;
  uint64_t next_sub_handle_ = 1;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::vector<std::shared_ptr<Connection>> dead_connections_;
};

}  // namespace bridgebench
