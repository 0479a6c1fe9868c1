#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "bridgebench/broker.hpp"
#include "bridgebench/client.hpp"

using namespace bridgebench;
using namespace std::chrono_literals;

namespace {

constexpr auto kUp = Direction::ClientToBroker;
constexpr auto kDown = Direction::BrokerToClient;

bool wait_until(const std::function<bool()>& pred,
                std::chrono::milliseconds budget = 5000ms) {
  auto deadline = RunClock::steady_now() + budget;
  while (RunClock::steady_now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

/// One broker plus the shared scheduler/clock, torn down in safe order.
struct Rig {
  DelayScheduler sched;
  RunClock clock;
  std::unique_ptr<Broker> broker;

  explicit Rig(BrokerConfig cfg = {}) {
    broker = std::make_unique<Broker>(std::move(cfg), sched);
    broker->start();
  }
  ~Rig() { broker->stop(); }

  std::unique_ptr<MqttClient> client(
      const std::string& id, LinkProfile lp = {},
      const std::function<void(ClientConfig&)>& tweak = {}) {
    ClientConfig c;
    c.client_id = id;
    c.port = broker->port();
    c.connect_timeout_ms = 2000;
    if (tweak) tweak(c);
    return std::make_unique<MqttClient>(c, lp, "link-" + id, sched, clock, nullptr);
  }
};

struct Inbox {
  std::mutex mu;
  std::vector<InboundMessage> messages;

  MessageHandler handler() {
    return [this](const InboundMessage& m) {
      std::lock_guard lock(mu);
      messages.push_back(m);
    };
  }
  size_t count() {
    std::lock_guard lock(mu);
    return messages.size();
  }
  InboundMessage at(size_t i) {
    std::lock_guard lock(mu);
    return messages.at(i);
  }
};

std::vector<uint8_t> bytes_of(const std::string& s) {
  return std::vector<uint8_t>(s.begin(), s.end());
}

}  // namespace

TEST_CASE("connect, publish each qos end to end, disconnect") {
  Rig rig;
  auto sub = rig.client("sub");
  auto pub = rig.client("pub");
  sub->connect();
  pub->connect();

  Inbox inbox;
  SubscribeOptions opts;
  opts.max_qos = 2;
  sub->subscribe({TopicFilter::require("t/#")}, opts, inbox.handler());

  for (uint8_t qos = 0; qos <= 2; ++qos) {
    auto out = pub->publish(TopicName::require("t/a"), bytes_of("m"), qos);
    REQUIRE(out.ok);
    CHECK(out.qos == qos);
  }
  REQUIRE(wait_until([&] { return inbox.count() == 3; }));
  CHECK(inbox.at(0).qos == 0);
  CHECK(inbox.at(1).qos == 1);
  CHECK(inbox.at(2).qos == 2);

  auto counters = rig.broker->counters();
  CHECK(counters.publishes_received == 3);
  CHECK(counters.messages_forwarded == 3);
  CHECK(counters.received_by_topic.at("t/a") == 3);

  pub->disconnect();
  sub->disconnect();
  CHECK_FALSE(pub->connected());
}

TEST_CASE("authentication outcomes") {
  BrokerConfig cfg;
  cfg.credentials = {{"user", "pw"}};
  Rig rig(cfg);

  SUBCASE("good credentials connect") {
    auto c = rig.client("a", {}, [](ClientConfig& cc) {
      cc.credentials = {{"user", "pw"}};
    });
    c->connect();
    CHECK(c->connected());
    c->disconnect();
  }
  SUBCASE("wrong password is refused") {
    auto c = rig.client("a", {}, [](ClientConfig& cc) {
      cc.credentials = {{"user", "nope"}};
      cc.connect_attempts = 1;
    });
    CHECK_THROWS_AS(c->connect(), AuthError);
  }
  SUBCASE("missing credentials are refused") {
    auto c = rig.client("a", {}, [](ClientConfig& cc) { cc.connect_attempts = 1; });
    CHECK_THROWS_AS(c->connect(), AuthError);
  }
}

TEST_CASE("empty client id is refused") {
  Rig rig;
  auto c = rig.client("", {}, [](ClientConfig& cc) { cc.connect_attempts = 1; });
  CHECK_THROWS_AS(c->connect(), AuthError);
}

TEST_CASE("second connect with the same client id takes over the session") {
  Rig rig;
  auto first = rig.client("same-id");
  first->connect();
  auto second = rig.client("same-id");
  second->connect();

  REQUIRE(wait_until([&] { return !first->connected(); }));
  CHECK(second->connected());
  CHECK(rig.broker->session_count() == 1);
  second->disconnect();
}

TEST_CASE("no_local keeps a client's own publishes out of its inbox") {
  Rig rig;
  auto c = rig.client("loopy");
  c->connect();
  Inbox inbox;
  SubscribeOptions opts;
  opts.no_local = true;
  c->subscribe({TopicFilter::require("x")}, opts, inbox.handler());

  REQUIRE(c->publish(TopicName::require("x"), bytes_of("self"), 0).ok);
  std::this_thread::sleep_for(200ms);
  CHECK(inbox.count() == 0);
  CHECK(rig.broker->counters().messages_unrouted == 1);

  auto other = rig.client("other");
  other->connect();
  REQUIRE(other->publish(TopicName::require("x"), bytes_of("peer"), 0).ok);
  REQUIRE(wait_until([&] { return inbox.count() == 1; }));
  other->disconnect();
  c->disconnect();
}

TEST_CASE("delivery qos is the floor of publish qos and granted qos") {
  Rig rig;
  auto sub = rig.client("sub");
  auto pub = rig.client("pub");
  sub->connect();
  pub->connect();
  Inbox inbox;
  SubscribeOptions opts;
  opts.max_qos = 1;
  sub->subscribe({TopicFilter::require("q")}, opts, inbox.handler());

  REQUIRE(pub->publish(TopicName::require("q"), bytes_of("m2"), 2).ok);
  REQUIRE(pub->publish(TopicName::require("q"), bytes_of("m0"), 0).ok);
  REQUIRE(wait_until([&] { return inbox.count() == 2; }));
  CHECK(inbox.at(0).qos == 1);  // publish qos 2, granted 1
  CHECK(inbox.at(1).qos == 0);
  pub->disconnect();
  sub->disconnect();
}

TEST_CASE("each matching session receives one copy") {
  Rig rig;
  auto first = rig.client("first");
  auto second = rig.client("second");
  auto pub = rig.client("pub");
  first->connect();
  second->connect();
  pub->connect();

  Inbox first_inbox, second_inbox;
  first->subscribe({TopicFilter::require("r")}, {}, first_inbox.handler());
  // Overlapping filters on one session must still yield a single copy.
  second->subscribe({TopicFilter::require("r"), TopicFilter::require("#")}, {},
                    second_inbox.handler());

  REQUIRE(pub->publish(TopicName::require("r"), bytes_of("m"), 0).ok);
  REQUIRE(wait_until([&] { return first_inbox.count() == 1 && second_inbox.count() == 1; }));
  std::this_thread::sleep_for(150ms);
  CHECK(first_inbox.count() == 1);
  CHECK(second_inbox.count() == 1);
  CHECK(rig.broker->counters().messages_forwarded == 2);
  pub->disconnect();
  first->disconnect();
  second->disconnect();
}

TEST_CASE("qos1 puback loss causes retransmit and duplicate delivery") {
  Rig rig;
  auto sub = rig.client("sub");
  sub->connect();
  Inbox inbox;
  SubscribeOptions opts;
  opts.max_qos = 2;
  sub->subscribe({TopicFilter::require("d")}, opts, inbox.handler());

  LinkProfile lossy_acks;
  lossy_acks.forced_drops = {{kDown, 1}};  // down 0 is CONNACK, 1 the PUBACK
  auto pub = rig.client("pub", lossy_acks, [](ClientConfig& cc) {
    cc.retry_interval_ms = 50;
  });
  pub->connect();

  auto out = pub->publish(TopicName::require("d"), bytes_of("m"), 1);
  REQUIRE(out.ok);
  CHECK(out.retries == 1);

  REQUIRE(wait_until([&] { return inbox.count() == 2; }));
  auto counters = rig.broker->counters();
  CHECK(counters.publishes_received == 2);   // original + retransmit
  CHECK(counters.messages_forwarded == 2);   // at-least-once forwards both
  CHECK(counters.duplicates_suppressed == 0);
  CHECK(counters.publishes_received ==
        counters.messages_forwarded + counters.messages_dropped_queue +
            counters.duplicates_suppressed + counters.messages_unrouted);
  pub->disconnect();
  sub->disconnect();
}

TEST_CASE("qos2 pubrec loss causes retransmit but single delivery") {
  Rig rig;
  auto sub = rig.client("sub");
  sub->connect();
  Inbox inbox;
  SubscribeOptions opts;
  opts.max_qos = 2;
  sub->subscribe({TopicFilter::require("e")}, opts, inbox.handler());

  LinkProfile lossy_acks;
  lossy_acks.forced_drops = {{kDown, 1}};  // the first PUBREC
  auto pub = rig.client("pub", lossy_acks, [](ClientConfig& cc) {
    cc.retry_interval_ms = 50;
  });
  pub->connect();

  auto out = pub->publish(TopicName::require("e"), bytes_of("m"), 2);
  REQUIRE(out.ok);
  CHECK(out.retries == 1);

  REQUIRE(wait_until([&] { return inbox.count() == 1; }));
  std::this_thread::sleep_for(200ms);
  CHECK(inbox.count() == 1);  // exactly once despite the repeat
  auto counters = rig.broker->counters();
  CHECK(counters.publishes_received == 2);
  CHECK(counters.duplicates_suppressed == 1);
  CHECK(counters.messages_forwarded == 1);
  CHECK(counters.publishes_received ==
        counters.messages_forwarded + counters.messages_dropped_queue +
            counters.duplicates_suppressed + counters.messages_unrouted);
  pub->disconnect();
  sub->disconnect();
}

TEST_CASE("subscriber queue overflow drops and counts") {
  BrokerConfig cfg;
  cfg.queue_capacity = 4;
  Rig rig(cfg);

  auto sub = rig.client("slow");
  sub->connect();
  std::mutex mu;
  size_t received = 0;
  sub->subscribe({TopicFilter::require("flood")}, {}, [&](const InboundMessage&) {
    {
      std::lock_guard lock(mu);
      ++received;
    }
    std::this_thread::sleep_for(15ms);
  });

  auto pub = rig.client("fast");
  pub->connect();
  const int n = 80;
  for (int i = 0; i < n; ++i)
    pub->publish_async(TopicName::require("flood"), bytes_of("m"), 0);

  REQUIRE(wait_until([&] {
    return rig.broker->counters().publishes_received == n;
  }));
  // Let the slow consumer drain whatever was queued.
  REQUIRE(wait_until([&] {
    auto c = rig.broker->counters();
    std::lock_guard lock(mu);
    return received == c.messages_forwarded;
  }));

  auto counters = rig.broker->counters();
  CHECK(counters.messages_dropped_queue > 0);
  CHECK(counters.messages_forwarded + counters.messages_dropped_queue == n);
  {
    std::lock_guard lock(mu);
    CHECK(received == counters.messages_forwarded);
  }
  pub->disconnect();
  sub->disconnect();
}

TEST_CASE("connect retries after a lost CONNECT and counts attempts") {
  Rig rig;
  LinkProfile lossy_connect;
  lossy_connect.forced_drops = {{kUp, 0}};
  auto c = rig.client("retry", lossy_connect, [](ClientConfig& cc) {
    cc.connect_timeout_ms = 150;
    cc.connect_attempts = 5;
  });
  c->connect();
  CHECK(c->connected());
  auto stats = c->stats();
  CHECK(stats.connects_attempted == 2);
  CHECK(stats.connects_succeeded == 1);
  CHECK(stats.link_dropped_frames == 1);
  c->disconnect();
}

TEST_CASE("connect gives up once attempts are exhausted") {
  Rig rig;
  LinkProfile black_hole;
  black_hole.segment_loss_p = 1.0;
  auto c = rig.client("void", black_hole, [](ClientConfig& cc) {
    cc.connect_timeout_ms = 80;
    cc.connect_attempts = 2;
  });
  CHECK_THROWS_AS(c->connect(), MqttError);
  CHECK(c->stats().connects_attempted == 2);
}

TEST_CASE("disconnect fails a publish that never completed") {
  Rig rig;
  LinkProfile lose_publish;
  lose_publish.forced_drops = {{kUp, 1}};
  auto c = rig.client("cut", lose_publish, [](ClientConfig& cc) {
    cc.retry_interval_ms = 60000;  // no retry inside the test window
  });
  c->connect();
  auto fut = c->publish_async(TopicName::require("t"), bytes_of("m"), 1);
  std::this_thread::sleep_for(50ms);
  c->disconnect();
  auto out = fut.get();
  CHECK_FALSE(out.ok);
  CHECK(out.error.find("closed") != std::string::npos);
}

TEST_CASE("idle connections ping inside the keep-alive window") {
  Rig rig;
  auto c = rig.client("idle", {}, [](ClientConfig& cc) { cc.keep_alive_s = 1; });
  c->connect();
  REQUIRE(wait_until(
      [&] {
        auto s = c->stats();
        return s.sent[static_cast<size_t>(PacketType::Pingreq)] >= 1 &&
               s.received[static_cast<size_t>(PacketType::Pingresp)] >= 1;
      },
      3000ms));
  CHECK(c->connected());
  c->disconnect();
}

TEST_CASE("handshake depth shows up in completion times") {
  Rig rig;
  LinkProfile slow;
  slow.one_way_delay_ms = 5;
  auto sub = rig.client("sub");
  sub->connect();
  SubscribeOptions opts;
  opts.max_qos = 2;
  Inbox inbox;
  sub->subscribe({TopicFilter::require("lat")}, opts, inbox.handler());
  auto pub = rig.client("pub", slow);
  pub->connect();

  auto o0 = pub->publish(TopicName::require("lat"), bytes_of("m"), 0);
  auto o1 = pub->publish(TopicName::require("lat"), bytes_of("m"), 1);
  auto o2 = pub->publish(TopicName::require("lat"), bytes_of("m"), 2);
  REQUIRE((o0.ok && o1.ok && o2.ok));

  uint64_t rt0 = o0.t_complete_us - o0.t_publish_us;
  uint64_t rt1 = o1.t_complete_us - o1.t_publish_us;
  uint64_t rt2 = o2.t_complete_us - o2.t_publish_us;
  CHECK(rt0 < 5000);    // fire and forget never waits on the link
  CHECK(rt1 >= 10000);  // PUBLISH up + PUBACK down
  CHECK(rt2 >= 20000);  // PUBLISH, PUBREC, PUBREL, PUBCOMP
  REQUIRE(wait_until([&] { return inbox.count() == 3; }));
  pub->disconnect();
  sub->disconnect();
}

TEST_CASE("auto stamp adds sequence and timestamp properties") {
  Rig rig;
  auto sub = rig.client("sub");
  sub->connect();
  Inbox inbox;
  sub->subscribe({TopicFilter::require("s")}, {}, inbox.handler());

  auto pub = rig.client("pub", {}, [](ClientConfig& cc) { cc.auto_stamp = true; });
  pub->connect();
  auto a = pub->publish(TopicName::require("s"), bytes_of("m"), 0);
  auto b = pub->publish(TopicName::require("s"), bytes_of("m"), 0);
  CHECK(a.seq == 0);
  CHECK(b.seq == 1);
  CHECK(pub->stamped_count() == 2);

  REQUIRE(wait_until([&] { return inbox.count() == 2; }));
  auto msg = inbox.at(1);
  bool saw_seq = false, saw_ts = false;
  for (const auto& [k, v] : msg.user_properties) {
    if (k == "seq") {
      saw_seq = true;
      CHECK(v == "1");
    }
    if (k == "ts_us") saw_ts = true;
  }
  CHECK(saw_seq);
  CHECK(saw_ts);
  pub->disconnect();
  sub->disconnect();
}

TEST_CASE("publishes scheduled into the link delay survive a quick disconnect") {
  Rig rig;
  auto sub = rig.client("sub");
  sub->connect();
  Inbox inbox;
  sub->subscribe({TopicFilter::require("burst")}, {}, inbox.handler());

  LinkProfile delayed;
  delayed.one_way_delay_ms = 30;
  auto pub = rig.client("pub", delayed);
  pub->connect();
  for (int i = 0; i < 5; ++i)
    pub->publish_async(TopicName::require("burst"), bytes_of("m"), 0);
  pub->disconnect();  // frames are still inside the 30 ms window here

  REQUIRE(wait_until([&] { return inbox.count() == 5; }));
  CHECK(rig.broker->counters().publishes_received == 5);
  sub->disconnect();
}
