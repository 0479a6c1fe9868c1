#include "bridgebench/broker.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <future>
#include <stdexcept>

namespace bridgebench {

namespace {
std::chrono::microseconds ms_to_us(double ms) {
  return std::chrono::microseconds(static_cast<int64_t>(ms * 1000.0));
}
}  // namespace

struct Broker::Connection {
  TcpSocket sock;
  std::thread reader_thread;
  std::thread writer_thread;
  std::shared_ptr<Session> session;

  std::mutex wmu;
  std::condition_variable wcv;
  struct Frame {
    std::vector<uint8_t> bytes;
    bool message = false;
  };
  std::deque<Frame> outq;
  size_t queued_messages = 0;
  bool closed = false;
  bool close_after_drain = false;

  /// Enqueue a frame. Message frames respect `capacity`; control frames and
  /// retransmissions always fit. Returns false when the bound rejects it.
  bool enqueue(std::vector<uint8_t> bytes, bool message, size_t capacity) {
    std::lock_guard lock(wmu);
    if (closed || close_after_drain) return false;
    if (message) {
      if (queued_messages >= capacity) return false;
      ++queued_messages;
    }
    outq.push_back(Frame{std::move(bytes), message});
    wcv.notify_one();
    return true;
  }

  void request_close(bool after_drain) {
    std::lock_guard lock(wmu);
    if (after_drain)
      close_after_drain = true;
    else
      closed = true;
    wcv.notify_one();
    if (!after_drain) sock.shutdown();
  }
};

struct Broker::Session {
  std::string client_id;
  std::weak_ptr<Connection> conn;
  std::vector<std::pair<TopicFilter, uint64_t>> owned_subs;
  std::map<uint16_t, PublishPacket> pending_in;  ///< QoS 2 barrier state

  enum class Stage { AwaitPuback, AwaitPubrec, AwaitPubcomp };
  struct Outbound {
    PublishPacket msg;
    Stage stage;
    uint32_t retries = 0;
    SteadyTime deadline;
  };
  std::map<uint16_t, Outbound> inflight;
  uint16_t next_packet_id = 1;

  uint16_t alloc_packet_id() {
    for (int i = 0; i < 65535; ++i) {
      uint16_t id = next_packet_id;
      next_packet_id = next_packet_id == 65535 ? 1 : next_packet_id + 1;
      if (!inflight.contains(id)) return id;
    }
    return 0;
  }
};

Broker::Broker(BrokerConfig cfg, DelayScheduler& scheduler)
    : cfg_(std::move(cfg)), scheduler_(scheduler) {}

Broker::~Broker() { stop(); }

void Broker::start() {
  auto listener = TcpListener::bind_loopback(cfg_.port);
  if (!listener)
    throw std::runtime_error("broker " + cfg_.name + ": cannot bind port " +
                             std::to_string(cfg_.port));
  listener_ = std::move(*listener);
  port_ = listener_.port();
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });

  double sweep_ms = std::max(cfg_.retry_interval_ms / 2.0, 5.0);
  std::lock_guard lock(mu_);
  sweep_task_ = scheduler_.schedule_after(ms_to_us(sweep_ms), [this] { sweep_tick(); });
}

void Broker::sweep_tick() {
  retransmit_sweep();
  reap_dead_connections();
  if (!running_) return;
  double sweep_ms = std::max(cfg_.retry_interval_ms / 2.0, 5.0);
  std::lock_guard lock(mu_);
  if (running_)
    sweep_task_ = scheduler_.schedule_after(ms_to_us(sweep_ms), [this] { sweep_tick(); });
}

void Broker::stop() {
  if (!running_.exchange(false)) {
    if (accept_thread_.joinable()) accept_thread_.join();
    return;
  }
  {
    std::lock_guard lock(mu_);
    scheduler_.cancel(sweep_task_);
  }
  // Drain any sweep tick already executing before state is torn down. A
  // zero id means the scheduler has stopped, so nothing can be in flight.
  std::promise<void> barrier;
  auto barrier_done = barrier.get_future();
  uint64_t barrier_id = scheduler_.schedule_after(
      std::chrono::microseconds(0), [&barrier] { barrier.set_value(); });
  if (barrier_id != 0) barrier_done.wait();

  listener_.close();
  if (accept_thread_.joinable()) accept_thread_.join();

  std::vector<std::shared_ptr<Connection>> all;
  {
    std::lock_guard lock(mu_);
    all = connections_;
    all.insert(all.end(), dead_connections_.begin(), dead_connections_.end());
    connections_.clear();
    dead_connections_.clear();
    sessions_.clear();
    sub_records_.clear();
  }
  for (auto& c : all) {
    c->request_close(false);
    c->sock.shutdown();
  }
  for (auto& c : all) {
    if (c->reader_thread.joinable()) c->reader_thread.join();
    if (c->writer_thread.joinable()) c->writer_thread.join();
    c->sock.close();
  }
}

BrokerCounters Broker::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

size_t Broker::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void Broker::accept_loop() {
  while (running_) {
    auto sock = listener_.accept();
    if (!sock) break;
    auto conn = std::make_shared<Connection>();
    conn->sock = std::move(*sock);
    {
      std::lock_guard lock(mu_);
      if (!running_) return;
      connections_.push_back(conn);
    }
    conn->reader_thread = std::thread([this, conn] { reader_loop(conn); });
    conn->writer_thread = std::thread([this, conn] { writer_loop(conn); });
  }
}

void Broker::reader_loop(std::shared_ptr<Connection> conn) {
  std::vector<uint8_t> buf;
  size_t off = 0;
  uint8_t chunk[65536];
  bool fatal = false;

  while (!fatal) {
    long n = conn->sock.read_some(std::span<uint8_t>(chunk, sizeof(chunk)));
    if (n <= 0) break;
    buf.insert(buf.end(), chunk, chunk + n);

    while (true) {
      auto view = std::span<const uint8_t>(buf).subspan(off);
      if (view.empty()) break;
      DecodeResult r = decode(view);
      if (r.status == DecodeStatus::Ok) {
        off += r.consumed;
        handle_packet(conn, std::move(r.packet));
        std::lock_guard lock(conn->wmu);
        if (conn->closed || conn->close_after_drain) {
          fatal = true;
          break;
        }
        continue;
      }
      if (r.status == DecodeStatus::NeedMoreBytes) {
        if (r.bytes_needed > cfg_.max_packet_size) {
          {
            std::lock_guard lock(mu_);
            ++counters_.malformed_packets;
          }
          conn->enqueue(encode(DisconnectPacket{reason::kQuotaExceeded}), false, 0);
          conn->request_close(true);
          fatal = true;
        }
        break;
      }
      // Malformed or Unsupported: the stream cannot be resynchronized.
      {
        std::lock_guard lock(mu_);
        ++counters_.malformed_packets;
      }
      conn->enqueue(encode(DisconnectPacket{reason::kMalformedPacket}), false, 0);
      conn->request_close(true);
      fatal = true;
      break;
    }

    if (off > 65536 && off * 2 > buf.size()) {
      buf.erase(buf.begin(), buf.begin() + static_cast<long>(off));
      off = 0;
    }
  }

  {
    std::lock_guard lock(mu_);
    drop_connection_locked(conn);
  }
  // Drain-respecting close so a final DISCONNECT still reaches the peer.
  conn->request_close(true);
}

void Broker::writer_loop(std::shared_ptr<Connection> conn) {
  std::unique_lock lock(conn->wmu);
  while (true) {
    conn->wcv.wait(lock, [&] {
      return conn->closed || !conn->outq.empty() || conn->close_after_drain;
    });
    if (conn->closed) break;
    if (conn->outq.empty()) {
      if (conn->close_after_drain) {
        conn->sock.shutdown();
        break;
      }
      continue;
    }
    Connection::Frame f = std::move(conn->outq.front());
    conn->outq.pop_front();
    if (f.message) --conn->queued_messages;
    lock.unlock();
    bool ok = conn->sock.write_all(f.bytes);
    lock.lock();
    if (!ok) {
      conn->closed = true;
      conn->sock.shutdown();
      break;
    }
  }
}

void Broker::handle_packet(const std::shared_ptr<Connection>& conn, ControlPacket pkt) {
  PacketType t = packet_type(pkt);
  if (!conn->session && t != PacketType::Connect) {
    conn->enqueue(encode(DisconnectPacket{reason::kProtocolError}), false, 0);
    conn->request_close(true);
    return;
  }
  switch (t) {
    case PacketType::Connect:
      handle_connect(conn, std::get<ConnectPacket>(std::move(pkt)));
      break;
    case PacketType::Publish:
      handle_publish(conn, std::get<PublishPacket>(std::move(pkt)));
      break;
    case PacketType::Subscribe:
      handle_subscribe(conn, std::get<SubscribePacket>(std::move(pkt)));
      break;
    case PacketType::Unsubscribe:
      handle_unsubscribe(conn, std::get<UnsubscribePacket>(std::move(pkt)));
      break;
    case PacketType::Puback:
    case PacketType::Pubrec:
    case PacketType::Pubrel:
    case PacketType::Pubcomp:
      handle_ack(conn, std::get<AckPacket>(pkt));
      break;
    case PacketType::Pingreq:
      conn->enqueue(encode(PingrespPacket{}), false, 0);
      break;
    case PacketType::Disconnect: {
      std::lock_guard lock(mu_);
      drop_connection_locked(conn);
      conn->request_close(true);
      break;
    }
    default:
      conn->enqueue(encode(DisconnectPacket{reason::kProtocolError}), false, 0);
      conn->request_close(true);
      break;
  }
}

void Broker::handle_connect(const std::shared_ptr<Connection>& conn, ConnectPacket p) {
  if (conn->session) {
    conn->enqueue(encode(DisconnectPacket{reason::kProtocolError}), false, 0);
    conn->request_close(true);
    return;
  }
  if (p.client_id.empty()) {
    conn->enqueue(encode(ConnackPacket{false, reason::kClientIdInvalid}), false, 0);
    conn->request_close(true);
    return;
  }
  if (!cfg_.credentials.empty()) {
    bool ok = false;
    if (p.username && p.password) {
      auto it = cfg_.credentials.find(*p.username);
      ok = it != cfg_.credentials.end() && it->second == *p.password;
    }
    if (!ok) {
      conn->enqueue(encode(ConnackPacket{false, reason::kBadUserNameOrPassword}),
                    false, 0);
      conn->request_close(true);
      return;
    }
  }

  std::shared_ptr<Connection> kicked;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(p.client_id);
    if (it != sessions_.end()) {
      kicked = it->second->conn.lock();
      remove_session_locked(it->second);
    }
    auto sess = std::make_shared<Session>();
    sess->client_id = p.client_id;
    sess->conn = conn;
    sessions_[p.client_id] = sess;
    conn->session = sess;
    ++counters_.connections_accepted;
  }
  if (kicked) {
    kicked->enqueue(encode(DisconnectPacket{reason::kSessionTakenOver}), false, 0);
    kicked->request_close(true);
  }
  // Session state is never resumed in this subset, so session_present is
  // always false regardless of clean_start.
  conn->enqueue(encode(ConnackPacket{false, reason::kSuccess}), false, 0);
}

void Broker::handle_publish(const std::shared_ptr<Connection>& conn, PublishPacket p) {
  std::lock_guard lock(mu_);
  ++counters_.publishes_received;
  auto sess = conn->session;
  if (!sess) return;

  switch (p.qos) {
    case 0:
      ++counters_.received_by_topic[p.topic];
      route_locked(p, sess);
      break;
    case 1: {
      uint16_t id = p.packet_id;
      ++counters_.received_by_topic[p.topic];
      route_locked(p, sess);
      conn->enqueue(encode(AckPacket{PacketType::Puback, id, reason::kSuccess}),
                    false, 0);
      break;
    }
    case 2: {
      uint16_t id = p.packet_id;
      if (sess->pending_in.contains(id)) {
        ++counters_.duplicates_suppressed;
      } else {
        ++counters_.received_by_topic[p.topic];
        sess->pending_in.emplace(id, std::move(p));
      }
      conn->enqueue(encode(AckPacket{PacketType::Pubrec, id, reason::kSuccess}),
                    false, 0);
      break;
    }
    default:
      break;
  }
}

void Broker::handle_subscribe(const std::shared_ptr<Connection>& conn,
                              SubscribePacket p) {
  std::lock_guard lock(mu_);
  auto sess = conn->session;
  SubackPacket ack;
  ack.packet_id = p.packet_id;
  for (auto& [filter_s, opts] : p.entries) {
    auto filter = TopicFilter::parse(filter_s);
    if (!filter) {
      ack.reason_codes.push_back(0x8F);  // topic filter invalid
      continue;
    }
    // Re-subscribing to the same filter replaces the previous options.
    subscriptions_.erase_if(*filter, [&](uint64_t h) {
      auto it = sub_records_.find(h);
      bool mine = it != sub_records_.end() && it->second.session.lock() == sess;
      if (mine) sub_records_.erase(it);
      return mine;
    });
    std::erase_if(sess->owned_subs,
                  [&](const auto& fs) { return fs.first == *filter; });

    uint64_t handle = next_sub_handle_++;
    sub_records_[handle] = SubRecord{sess, opts};
    subscriptions_.insert(*filter, handle);
    sess->owned_subs.emplace_back(*filter, handle);
    ack.reason_codes.push_back(opts.max_qos);
  }
  conn->enqueue(encode(ack), false, 0);
}

void Broker::handle_unsubscribe(const std::shared_ptr<Connection>& conn,
                                UnsubscribePacket p) {
  std::lock_guard lock(mu_);
  auto sess = conn->session;
  UnsubackPacket ack;
  ack.packet_id = p.packet_id;
  for (auto& filter_s : p.filters) {
    auto filter = TopicFilter::parse(filter_s);
    if (!filter) {
      ack.reason_codes.push_back(0x8F);
      continue;
    }
    size_t removed = subscriptions_.erase_if(*filter, [&](uint64_t h) {
      auto it = sub_records_.find(h);
      bool mine = it != sub_records_.end() && it->second.session.lock() == sess;
      if (mine) sub_records_.erase(it);
      return mine;
    });
    std::erase_if(sess->owned_subs,
                  [&](const auto& fs) { return fs.first == *filter; });
    ack.reason_codes.push_back(removed ? reason::kSuccess
                                       : reason::kNoSubscriptionExisted);
  }
  conn->enqueue(encode(ack), false, 0);
}

void Broker::handle_ack(const std::shared_ptr<Connection>& conn, AckPacket p) {
  std::lock_guard lock(mu_);
  auto sess = conn->session;
  if (!sess) return;

  switch (p.type) {
    case PacketType::Puback: {
      auto it = sess->inflight.find(p.packet_id);
      if (it != sess->inflight.end() && it->second.stage == Session::Stage::AwaitPuback)
        sess->inflight.erase(it);
      break;
    }
    case PacketType::Pubrec: {
      auto it = sess->inflight.find(p.packet_id);
      if (it != sess->inflight.end() && it->second.stage == Session::Stage::AwaitPubrec) {
        it->second.stage = Session::Stage::AwaitPubcomp;
        it->second.deadline = RunClock::steady_now() + ms_to_us(cfg_.retry_interval_ms);
        conn->enqueue(
            encode(AckPacket{PacketType::Pubrel, p.packet_id, reason::kSuccess}),
            false, 0);
      }
      break;
    }
    case PacketType::Pubcomp: {
      auto it = sess->inflight.find(p.packet_id);
      if (it != sess->inflight.end() && it->second.stage == Session::Stage::AwaitPubcomp)
        sess->inflight.erase(it);
      break;
    }
    case PacketType::Pubrel: {
      // Inbound QoS 2 barrier release: the stored message travels on now.
      auto it = sess->pending_in.find(p.packet_id);
      if (it != sess->pending_in.end()) {
        route_locked(it->second, sess);
        sess->pending_in.erase(it);
      }
      conn->enqueue(
          encode(AckPacket{PacketType::Pubcomp, p.packet_id, reason::kSuccess}),
          false, 0);
      break;
    }
    default:
      break;
  }
}

void Broker::route_locked(const PublishPacket& msg,
                          const std::shared_ptr<Session>& publisher) {
  struct Best {
    std::shared_ptr<Session> session;
    uint8_t max_qos = 0;
    bool rap = false;
    bool any = false;
  };
  std::map<Session*, Best> targets;

  for (uint64_t handle : subscriptions_.match(*TopicName::parse(msg.topic))) {
    auto it = sub_records_.find(handle);
    if (it == sub_records_.end()) continue;
    auto sess = it->second.session.lock();
    if (!sess) continue;
    if (it->second.opts.no_local && sess == publisher) continue;
    Best& b = targets[sess.get()];
    if (!b.any || it->second.opts.max_qos > b.max_qos) {
      b.session = sess;
      b.max_qos = it->second.opts.max_qos;
      b.rap = it->second.opts.retain_as_published;
    }
    b.any = true;
  }

  if (targets.empty()) {
    ++counters_.messages_unrouted;
    return;
  }
  for (auto& [_, best] : targets) {
    PublishPacket out;
    out.topic = msg.topic;
    out.payload = msg.payload;
    out.user_properties = msg.user_properties;
    out.message_expiry_s = msg.message_expiry_s;
    out.qos = std::min(msg.qos, best.max_qos);
    out.retain = best.rap ? msg.retain : false;
    deliver_locked(best.session, std::move(out));
  }
}

void Broker::deliver_locked(const std::shared_ptr<Session>& target, PublishPacket msg) {
  auto conn = target->conn.lock();
  if (!conn) {
    ++counters_.messages_dropped_queue;
    return;
  }
  if (msg.qos == 0) {
    msg.packet_id = 0;
    msg.dup = false;
    if (conn->enqueue(encode(msg), true, cfg_.queue_capacity))
      ++counters_.messages_forwarded;
    else
      ++counters_.messages_dropped_queue;
    return;
  }

  uint16_t id = target->alloc_packet_id();
  if (id == 0) {
    ++counters_.messages_dropped_queue;
    return;
  }
  msg.packet_id = id;
  msg.dup = false;
  std::vector<uint8_t> frame = encode(msg);
  Session::Outbound ob;
  ob.stage = msg.qos == 1 ? Session::Stage::AwaitPuback : Session::Stage::AwaitPubrec;
  ob.retries = 0;
  ob.deadline = RunClock::steady_now() + ms_to_us(cfg_.retry_interval_ms);
  ob.msg = std::move(msg);
  if (conn->enqueue(std::move(frame), true, cfg_.queue_capacity)) {
    target->inflight.emplace(id, std::move(ob));
    ++counters_.messages_forwarded;
  } else {
    ++counters_.messages_dropped_queue;
  }
}

void Broker::retransmit_sweep() {
  std::lock_guard lock(mu_);
  auto now = RunClock::steady_now();
  for (auto& [_, sess] : sessions_) {
    auto conn = sess->conn.lock();
    for (auto it = sess->inflight.begin(); it != sess->inflight.end();) {
      Session::Outbound& ob = it->second;
      if (ob.deadline > now) {
        ++it;
        continue;
      }
      if (cfg_.max_retries >= 0 &&
          ob.retries >= static_cast<uint32_t>(cfg_.max_retries)) {
        ++counters_.retries_exhausted;
        it = sess->inflight.erase(it);
        continue;
      }
      ++ob.retries;
      ob.deadline = now + ms_to_us(cfg_.retry_interval_ms);
      if (conn) {
        if (ob.stage == Session::Stage::AwaitPubcomp) {
          conn->enqueue(
              encode(AckPacket{PacketType::Pubrel, it->first, reason::kSuccess}),
              false, 0);
        } else {
          PublishPacket dup = ob.msg;
          dup.dup = true;
          conn->enqueue(encode(dup), false, 0);
        }
      }
      ++it;
    }
  }
}

void Broker::reap_dead_connections() {
  std::vector<std::shared_ptr<Connection>> dead;
  {
    std::lock_guard lock(mu_);
    dead.swap(dead_connections_);
  }
  for (auto& c : dead) {
    c->request_close(false);
    if (c->reader_thread.joinable() &&
        c->reader_thread.get_id() != std::this_thread::get_id())
      c->reader_thread.join();
    if (c->writer_thread.joinable()) c->writer_thread.join();
    c->sock.close();
  }
}

void Broker::remove_session_locked(const std::shared_ptr<Session>& sess) {
  for (auto& [filter, handle] : sess->owned_subs) {
    subscriptions_.erase_if(filter, [&](uint64_t h) { return h == handle; });
    sub_records_.erase(handle);
  }
  sess->owned_subs.clear();
  sess->inflight.clear();
  sess->pending_in.clear();
  auto it = sessions_.find(sess->client_id);
  if (it != sessions_.end() && it->second == sess) sessions_.erase(it);
}

void Broker::drop_connection_locked(const std::shared_ptr<Connection>& conn) {
  if (conn->session) {
    if (conn->session->conn.lock() == conn) remove_session_locked(conn->session);
    conn->session.reset();
  }
  auto it = std::find(connections_.begin(), connections_.end(), conn);
  if (it != connections_.end()) {
    connections_.erase(it);
    dead_connections_.push_back(conn);
  }
}

}  // namespace bridgebench
