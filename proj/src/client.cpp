#include "bridgebench/client.hpp"

#include <algorithm>

#include "bridgebench/socket.hpp"

namespace bridgebench {

namespace {
std::chrono::microseconds ms_to_us(double ms) {
  return std::chrono::microseconds(static_cast<int64_t>(ms * 1000.0));
}
}  // namespace

struct MqttClient::ConnectionCtx {
  TcpSocket sock;
  std::thread reader_thread;
  std::thread writer_thread;
  uint64_t generation = 0;

  std::mutex wmu;
  std::condition_variable wcv;
  std::deque<std::vector<uint8_t>> outq;
  uint64_t scheduled_sends = 0;  ///< frames still inside the link delay window
  bool writing = false;
  bool closed = false;

  /// Completion of a frame's link transit: hand it to the writer.
  void deliver(std::vector<uint8_t> frame) {
    std::lock_guard lock(wmu);
    --scheduled_sends;
    if (!closed) outq.push_back(std::move(frame));
    wcv.notify_all();
  }

  void request_close() {
    std::lock_guard lock(wmu);
    closed = true;
    wcv.notify_all();
    sock.shutdown();
  }
};

struct MqttClient::Inflight {
  PublishPacket msg;
  enum class Stage { AwaitPuback, AwaitPubrec, AwaitPubcomp } stage;
  uint32_t retries = 0;
  SteadyTime deadline;
  std::promise<PublishOutcome> promise;
  PublishOutcome partial;
  uint64_t generation = 0;
};

MqttClient::MqttClient(ClientConfig cfg, LinkProfile link_profile,
                       std::string link_id, DelayScheduler& scheduler,
                       const RunClock& clock, DropTraceLog* trace)
    : cfg_(std::move(cfg)),
      link_id_(std::move(link_id)),
      link_(link_id_, std::move(link_profile), trace),
      scheduler_(scheduler),
      clock_(clock),
      alive_(std::make_shared<std::atomic<bool>>(true)),
      last_send_(RunClock::steady_now()) {
  dispatch_thread_ = std::thread([this] { dispatch_loop(); });
}

MqttClient::~MqttClient() {
  try {
    disconnect();
  } catch (...) {
  }
  alive_->store(false);

  // Wait out any of this client's tasks already running on the scheduler
  // thread; tasks firing later bail on the dead alive flag.
  std::promise<void> barrier;
  auto done = barrier.get_future();
  uint64_t id = scheduler_.schedule_after(std::chrono::microseconds(0),
                                          [&barrier] { barrier.set_value(); });
  if (id != 0) done.wait();

  {
    std::lock_guard lock(dq_mu_);
    dispatch_stop_ = true;
    dq_cv_.notify_one();
  }
  if (dispatch_thread_.joinable()) dispatch_thread_.join();

  std::shared_ptr<ConnectionCtx> ctx;
  {
    std::lock_guard lock(mu_);
    ctx = std::move(ctx_);
  }
  if (ctx) close_ctx(std::move(ctx));
}

void MqttClient::dispatch_loop() {
  std::unique_lock lock(dq_mu_);
  while (true) {
    dq_cv_.wait(lock, [&] { return dispatch_stop_ || !dispatch_q_.empty(); });
    if (dispatch_stop_) return;
    auto fn = std::move(dispatch_q_.front());
    dispatch_q_.pop_front();
    lock.unlock();
    fn();
    lock.lock();
  }
}

void MqttClient::dispatch_enqueue(std::function<void()> fn) {
  std::lock_guard lock(dq_mu_);
  if (dispatch_stop_) return;
  dispatch_q_.push_back(std::move(fn));
  dq_cv_.notify_one();
}

uint64_t MqttClient::schedule_task(SteadyTime when, std::function<void()> fn) {
  std::weak_ptr<std::atomic<bool>> guard = alive_;
  return scheduler_.schedule_at(when, [guard, fn = std::move(fn)] {
    auto alive = guard.lock();
    if (!alive || !alive->load()) return;
    fn();
  });
}

void MqttClient::send_frame_locked(const std::shared_ptr<ConnectionCtx>& ctx,
                                   std::vector<uint8_t> frame, PacketType type,
                                   bool is_connect) {
  if (!ctx) return;
  SteadyTime now = RunClock::steady_now();
  auto tr = link_.transit(Direction::ClientToBroker, frame.size(), is_connect, now);
  ++stats_.sent[static_cast<size_t>(type)];
  last_send_ = now;
  if (tr.dropped) {
    ++stats_.link_dropped_frames;
    return;
  }
  {
    std::lock_guard wlock(ctx->wmu);
    ++ctx->scheduled_sends;
  }
  scheduler_.schedule_at(tr.deliver_at,
                         [ctx, f = std::move(frame)]() mutable { ctx->deliver(std::move(f)); });
}

void MqttClient::reader_loop(std::shared_ptr<ConnectionCtx> ctx) {
  std::vector<uint8_t> buf;
  size_t off = 0;
  uint8_t chunk[65536];

  while (true) {
    long n = ctx->sock.read_some(std::span<uint8_t>(chunk, sizeof(chunk)));
    if (n <= 0) break;
    buf.insert(buf.end(), chunk, chunk + n);

    bool broken = false;
    while (!broken) {
      auto view = std::span<const uint8_t>(buf).subspan(off);
      if (view.empty()) break;
      DecodeResult r = decode(view);
      if (r.status == DecodeStatus::NeedMoreBytes) {
        if (r.bytes_needed > cfg_.max_packet_size) broken = true;
        break;
      }
      if (r.status != DecodeStatus::Ok) {
        broken = true;
        break;
      }
      off += r.consumed;

      SteadyTime now = RunClock::steady_now();
      auto tr = link_.transit(Direction::BrokerToClient, r.consumed, false, now);
      if (tr.dropped) {
        std::lock_guard lock(mu_);
        ++stats_.link_dropped_frames;
        continue;
      }
      auto pkt = std::make_shared<ControlPacket>(std::move(r.packet));
      schedule_task(tr.deliver_at, [this, ctx, pkt] {
        dispatch_enqueue([this, ctx, pkt] { on_packet(ctx, std::move(*pkt)); });
      });
    }
    if (broken) break;

    if (off > 65536 && off * 2 > buf.size()) {
      buf.erase(buf.begin(), buf.begin() + static_cast<long>(off));
      off = 0;
    }
  }
}

void MqttClient::writer_loop(std::shared_ptr<ConnectionCtx> ctx) {
  std::unique_lock lock(ctx->wmu);
  while (true) {
    ctx->wcv.wait(lock, [&] { return ctx->closed || !ctx->outq.empty(); });
    if (ctx->closed) return;
    // The frame stays queued until written so an empty queue means every
    // accepted frame has reached the socket (drain_ctx relies on this).
    auto frame = ctx->outq.front();
    ctx->writing = true;
    lock.unlock();
    bool ok = ctx->sock.write_all(frame);
    lock.lock();
    ctx->writing = false;
    if (!ctx->outq.empty()) ctx->outq.pop_front();
    ctx->wcv.notify_all();
    if (!ok) {
      ctx->closed = true;
      ctx->sock.shutdown();
      return;
    }
  }
}

void MqttClient::connect() {
  int attempts = std::max(1, cfg_.connect_attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    auto sock = TcpSocket::connect_loopback(cfg_.port);
    {
      std::lock_guard lock(mu_);
      ++stats_.connects_attempted;
    }
    if (!sock) continue;

    auto ctx = std::make_shared<ConnectionCtx>();
    ctx->sock = std::move(*sock);
    {
      std::lock_guard lock(mu_);
      ctx->generation = ++generation_;
      ctx_ = ctx;
      got_connack_ = false;
      connack_reason_ = 0;
    }
    ctx->reader_thread = std::thread([this, ctx] { reader_loop(ctx); });
    ctx->writer_thread = std::thread([this, ctx] { writer_loop(ctx); });

    ConnectPacket c;
    c.client_id = cfg_.client_id;
    c.clean_start = cfg_.clean_start;
    c.keep_alive = cfg_.keep_alive_s;
    if (cfg_.credentials) {
      c.username = cfg_.credentials->first;
      c.password = cfg_.credentials->second;
    }

    std::unique_lock lock(mu_);
    send_frame_locked(ctx, encode(c), PacketType::Connect, true);
    bool got = connack_cv_.wait_for(lock, ms_to_us(cfg_.connect_timeout_ms),
                                    [&] { return got_connack_; });
    if (got && connack_reason_ == reason::kSuccess) {
      connected_ = true;
      ++stats_.connects_succeeded;
      arm_keepalive_locked();
      return;
    }
    uint8_t rc = connack_reason_;
    ctx_.reset();
    lock.unlock();
    close_ctx(ctx);
    if (got) throw AuthError("connect refused, reason code " + std::to_string(rc));
  }
  throw MqttError("connect: attempts exhausted for " + cfg_.client_id);
}

void MqttClient::disconnect() {
  std::shared_ptr<ConnectionCtx> ctx;
  {
    std::lock_guard lock(mu_);
    if (keepalive_task_) {
      scheduler_.cancel(keepalive_task_);
      keepalive_task_ = 0;
    }
    fail_pending_locked("connection closed");
    if (connected_ && ctx_)
      send_frame_locked(ctx_, encode(DisconnectPacket{}), PacketType::Disconnect,
                        false);
    connected_ = false;
    ctx = std::move(ctx_);
  }
  if (ctx) {
    drain_ctx(ctx);
    close_ctx(std::move(ctx));
  }
}

void MqttClient::drain_ctx(const std::shared_ptr<ConnectionCtx>& ctx) {
  std::unique_lock lock(ctx->wmu);
  ctx->wcv.wait_for(lock, std::chrono::seconds(5), [&] {
    return ctx->closed ||
           (ctx->scheduled_sends == 0 && ctx->outq.empty() && !ctx->writing);
  });
}

bool MqttClient::connected() const {
  std::lock_guard lock(mu_);
  return connected_;
}

void MqttClient::close_ctx(std::shared_ptr<ConnectionCtx> ctx) {
  ctx->request_close();
  if (ctx->reader_thread.joinable()) ctx->reader_thread.join();
  if (ctx->writer_thread.joinable()) ctx->writer_thread.join();
  ctx->sock.close();
}

uint16_t MqttClient::alloc_packet_id_locked() {
  for (int i = 0; i < 65535; ++i) {
    uint16_t id = next_packet_id_;
    next_packet_id_ = next_packet_id_ == 65535 ? 1 : next_packet_id_ + 1;
    if (!inflight_.contains(id) && !pending_subacks_.contains(id)) return id;
  }
  return 0;
}

void MqttClient::subscribe(const std::vector<TopicFilter>& filters,
                           SubscribeOptions opts, MessageHandler handler) {
  if (filters.empty()) throw MqttError("subscribe: no filters");
  std::future<SubackPacket> fut;
  uint16_t id = 0;
  {
    std::lock_guard lock(mu_);
    if (!connected_) throw MqttError("subscribe: not connected");
    id = alloc_packet_id_locked();
    if (id == 0) throw MqttError("subscribe: packet ids exhausted");
    std::promise<SubackPacket> prom;
    fut = prom.get_future();
    pending_subacks_.emplace(id, std::move(prom));
    handlers_.emplace_back(filters, std::move(handler));

    SubscribePacket sp;
    sp.packet_id = id;
    for (const auto& f : filters) sp.entries.emplace_back(f.str(), opts);
    send_frame_locked(ctx_, encode(sp), PacketType::Subscribe, false);
  }

  auto unregister = [this] {
    std::lock_guard lock(mu_);
    if (!handlers_.empty()) handlers_.pop_back();
  };
  if (fut.wait_for(ms_to_us(cfg_.connect_timeout_ms)) != std::future_status::ready) {
    {
      std::lock_guard lock(mu_);
      pending_subacks_.erase(id);
    }
    unregister();
    throw MqttError("subscribe: timed out waiting for suback");
  }
  SubackPacket ack = fut.get();
  for (uint8_t code : ack.reason_codes)
    if (code > 2) {
      unregister();
      throw MqttError("subscribe refused, reason code " + std::to_string(code));
    }
}

std::shared_future<PublishOutcome> MqttClient::publish_async(
    const TopicName& topic, std::vector<uint8_t> payload, uint8_t qos,
    std::vector<UserProperty> user_properties) {
  std::promise<PublishOutcome> prom;
  auto fut = prom.get_future().share();

  std::lock_guard lock(mu_);
  PublishOutcome partial;
  partial.qos = qos;
  partial.payload_bytes = payload.size();
  partial.t_publish_us = clock_.now_us();
  if (cfg_.auto_stamp) partial.seq = seq_counter_++;

  if (!connected_ || !ctx_) {
    partial.error = "not connected";
    partial.t_complete_us = partial.t_publish_us;
    prom.set_value(std::move(partial));
    return fut;
  }

  if (cfg_.auto_stamp) {
    user_properties.emplace_back("ts_us", std::to_string(partial.t_publish_us));
    user_properties.emplace_back("seq", std::to_string(partial.seq));
  }

  PublishPacket p;
  p.topic = topic.str();
  p.qos = qos;
  p.user_properties = std::move(user_properties);
  p.payload = std::move(payload);

  if (qos == 0) {
    send_frame_locked(ctx_, encode(p), PacketType::Publish, false);
    partial.ok = true;
    partial.t_complete_us = clock_.now_us();
    prom.set_value(std::move(partial));
    return fut;
  }

  uint16_t id = alloc_packet_id_locked();
  if (id == 0) {
    partial.error = "packet ids exhausted";
    partial.t_complete_us = clock_.now_us();
    prom.set_value(std::move(partial));
    return fut;
  }
  p.packet_id = id;

  Inflight inf;
  inf.stage = qos == 1 ? Inflight::Stage::AwaitPuback : Inflight::Stage::AwaitPubrec;
  inf.deadline = RunClock::steady_now() + ms_to_us(cfg_.retry_interval_ms);
  inf.promise = std::move(prom);
  inf.partial = std::move(partial);
  inf.generation = generation_;
  std::vector<uint8_t> frame = encode(p);
  inf.msg = std::move(p);

  uint64_t gen = generation_;
  inflight_.emplace(id, std::move(inf));
  send_frame_locked(ctx_, std::move(frame), PacketType::Publish, false);
  schedule_task(RunClock::steady_now() + ms_to_us(cfg_.retry_interval_ms),
                [this, id, gen] { retry_check(id, gen); });
  return fut;
}

PublishOutcome MqttClient::publish(const TopicName& topic,
                                   std::vector<uint8_t> payload, uint8_t qos,
                                   std::vector<UserProperty> user_properties) {
  return publish_async(topic, std::move(payload), qos, std::move(user_properties))
      .get();
}

void MqttClient::retry_check(uint16_t packet_id, uint64_t generation) {
  std::lock_guard lock(mu_);
  auto it = inflight_.find(packet_id);
  if (it == inflight_.end() || it->second.generation != generation) return;
  Inflight& inf = it->second;

  SteadyTime now = RunClock::steady_now();
  if (inf.deadline > now + std::chrono::milliseconds(1)) {
    schedule_task(inf.deadline, [this, packet_id, generation] {
      retry_check(packet_id, generation);
    });
    return;
  }

  if (cfg_.max_retries >= 0 &&
      inf.retries >= static_cast<uint32_t>(cfg_.max_retries)) {
    PublishOutcome out = std::move(inf.partial);
    out.retries = inf.retries;
    out.error = "retry budget exhausted";
    out.t_complete_us = clock_.now_us();
    auto prom = std::move(inf.promise);
    inflight_.erase(it);
    prom.set_value(std::move(out));
    return;
  }

  ++inf.retries;
  inf.deadline = now + ms_to_us(cfg_.retry_interval_ms);
  if (inf.stage == Inflight::Stage::AwaitPubcomp) {
    send_frame_locked(
        ctx_, encode(AckPacket{PacketType::Pubrel, packet_id, reason::kSuccess}),
        PacketType::Pubrel, false);
  } else {
    PublishPacket dup = inf.msg;
    dup.dup = true;
    send_frame_locked(ctx_, encode(dup), PacketType::Publish, false);
  }
  schedule_task(inf.deadline, [this, packet_id, generation] {
    retry_check(packet_id, generation);
  });
}

void MqttClient::fulfill_locked(uint16_t packet_id, PublishOutcome outcome) {
  auto it = inflight_.find(packet_id);
  if (it == inflight_.end()) return;
  auto prom = std::move(it->second.promise);
  inflight_.erase(it);
  prom.set_value(std::move(outcome));
}

void MqttClient::fail_pending_locked(const std::string& why) {
  for (auto& [id, inf] : inflight_) {
    PublishOutcome out = std::move(inf.partial);
    out.retries = inf.retries;
    out.error = why;
    out.t_complete_us = clock_.now_us();
    inf.promise.set_value(std::move(out));
  }
  inflight_.clear();
  for (auto& [id, prom] : pending_subacks_)
    prom.set_exception(std::make_exception_ptr(MqttError(why)));
  pending_subacks_.clear();
  pending_in_.clear();
}

void MqttClient::on_packet(const std::shared_ptr<ConnectionCtx>& ctx,
                           ControlPacket pkt) {
  {
    std::lock_guard lock(mu_);
    if (!ctx_ || ctx->generation != generation_) return;
    ++stats_.received[static_cast<size_t>(packet_type(pkt))];
  }

  switch (packet_type(pkt)) {
    case PacketType::Connack: {
      const auto& c = std::get<ConnackPacket>(pkt);
      std::lock_guard lock(mu_);
      got_connack_ = true;
      connack_reason_ = c.reason_code;
      connack_cv_.notify_all();
      break;
    }
    case PacketType::Publish:
      on_publish(ctx, std::get<PublishPacket>(std::move(pkt)));
      break;
    case PacketType::Puback:
    case PacketType::Pubrec:
    case PacketType::Pubrel:
    case PacketType::Pubcomp:
      on_ack(ctx, std::get<AckPacket>(pkt));
      break;
    case PacketType::Suback: {
      auto& s = std::get<SubackPacket>(pkt);
      std::lock_guard lock(mu_);
      auto it = pending_subacks_.find(s.packet_id);
      if (it != pending_subacks_.end()) {
        it->second.set_value(std::move(s));
        pending_subacks_.erase(it);
      }
      break;
    }
    case PacketType::Pingresp:
      break;
    case PacketType::Disconnect: {
      std::lock_guard lock(mu_);
      connected_ = false;
      fail_pending_locked("disconnected by broker");
      break;
    }
    default:
      break;
  }
}

void MqttClient::on_publish(const std::shared_ptr<ConnectionCtx>& ctx,
                            PublishPacket p) {
  switch (p.qos) {
    case 0:
      deliver_to_handlers(std::move(p));
      break;
    case 1: {
      uint16_t id = p.packet_id;
      deliver_to_handlers(std::move(p));
      std::lock_guard lock(mu_);
      if (ctx->generation != generation_) return;
      send_frame_locked(ctx,
                        encode(AckPacket{PacketType::Puback, id, reason::kSuccess}),
                        PacketType::Puback, false);
      break;
    }
    case 2: {
      uint16_t id = p.packet_id;
      {
        std::lock_guard lock(mu_);
        if (ctx->generation != generation_) return;
        if (!pending_in_.contains(id)) pending_in_.emplace(id, std::move(p));
        send_frame_locked(ctx,
                          encode(AckPacket{PacketType::Pubrec, id, reason::kSuccess}),
                          PacketType::Pubrec, false);
      }
      break;
    }
    default:
      break;
  }
}

void MqttClient::on_ack(const std::shared_ptr<ConnectionCtx>& ctx,
                        const AckPacket& p) {
  switch (p.type) {
    case PacketType::Puback: {
      std::lock_guard lock(mu_);
      auto it = inflight_.find(p.packet_id);
      if (it == inflight_.end() || it->second.stage != Inflight::Stage::AwaitPuback)
        return;
      PublishOutcome out = std::move(it->second.partial);
      out.ok = true;
      out.retries = it->second.retries;
      out.t_complete_us = clock_.now_us();
      fulfill_locked(p.packet_id, std::move(out));
      break;
    }
    case PacketType::Pubrec: {
      std::lock_guard lock(mu_);
      auto it = inflight_.find(p.packet_id);
      if (it == inflight_.end() || it->second.stage != Inflight::Stage::AwaitPubrec)
        return;
      it->second.stage = Inflight::Stage::AwaitPubcomp;
      it->second.deadline = RunClock::steady_now() + ms_to_us(cfg_.retry_interval_ms);
      send_frame_locked(
          ctx, encode(AckPacket{PacketType::Pubrel, p.packet_id, reason::kSuccess}),
          PacketType::Pubrel, false);
      break;
    }
    case PacketType::Pubcomp: {
      std::lock_guard lock(mu_);
      auto it = inflight_.find(p.packet_id);
      if (it == inflight_.end() || it->second.stage != Inflight::Stage::AwaitPubcomp)
        return;
      PublishOutcome out = std::move(it->second.partial);
      out.ok = true;
      out.retries = it->second.retries;
      out.t_complete_us = clock_.now_us();
      fulfill_locked(p.packet_id, std::move(out));
      break;
    }
    case PacketType::Pubrel: {
      std::optional<PublishPacket> msg;
      {
        std::lock_guard lock(mu_);
        auto it = pending_in_.find(p.packet_id);
        if (it != pending_in_.end()) {
          msg = std::move(it->second);
          pending_in_.erase(it);
        }
      }
      // Barrier release: the message becomes visible only now, and the
      // handler finishes before PUBCOMP closes the handshake.
      if (msg) deliver_to_handlers(std::move(*msg));
      std::lock_guard lock(mu_);
      if (ctx->generation != generation_) return;
      send_frame_locked(
          ctx, encode(AckPacket{PacketType::Pubcomp, p.packet_id, reason::kSuccess}),
          PacketType::Pubcomp, false);
      break;
    }
    default:
      break;
  }
}

void MqttClient::deliver_to_handlers(PublishPacket msg) {
  std::vector<std::pair<std::vector<TopicFilter>, MessageHandler>> handlers;
  {
    std::lock_guard lock(mu_);
    handlers = handlers_;
  }
  auto name = TopicName::parse(msg.topic);
  if (!name) return;

  for (auto& [filters, handler] : handlers) {
    bool hit = std::any_of(filters.begin(), filters.end(),
                           [&](const TopicFilter& f) { return f.matches(*name); });
    if (!hit) continue;
    InboundMessage im;
    im.topic = *name;
    im.payload = msg.payload;
    im.qos = msg.qos;
    im.dup = msg.dup;
    im.retain = msg.retain;
    im.user_properties = msg.user_properties;
    im.arrival_us = clock_.now_us();
    handler(im);
  }
}

void MqttClient::arm_keepalive_locked() {
  if (cfg_.keep_alive_s == 0) return;
  auto half = std::chrono::milliseconds(cfg_.keep_alive_s * 500);
  keepalive_task_ = schedule_task(RunClock::steady_now() + half,
                                  [this] { keepalive_tick(); });
}

void MqttClient::keepalive_tick() {
  std::lock_guard lock(mu_);
  if (!connected_ || !ctx_) return;
  auto half = std::chrono::milliseconds(cfg_.keep_alive_s * 500);
  if (RunClock::steady_now() - last_send_ >= half)
    send_frame_locked(ctx_, encode(PingreqPacket{}), PacketType::Pingreq, false);
  keepalive_task_ = schedule_task(RunClock::steady_now() + half,
                                  [this] { keepalive_tick(); });
}

ClientStats MqttClient::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

uint64_t MqttClient::stamped_count() const {
  std::lock_guard lock(mu_);
  return seq_counter_;
}

}  // namespace bridgebench
