#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bridgebench {

/// Validated MQTT topic name: non-empty, '/'-separated, no wildcards.
class TopicName {
 public:
  static std::optional<TopicName> parse(std::string_view s);

  /// parse() that throws std::invalid_argument; for inputs known to be valid.
  static TopicName require(std::string_view s);

  const std::string& str() const { return text_; }
  const std::vector<std::string>& levels() const { return levels_; }

  /// Bytes this name contributes to a packet's topic field (UTF-8 length,
  /// excluding the 2-byte length prefix).
  size_t overhead_bytes() const { return text_.size(); }

  bool operator==(const TopicName&) const = default;
  auto operator<=>(const TopicName& o) const { return text_ <=> o.text_; }

 private:
  std::string text_;
  std::vector<std::string> levels_;
};

/// Validated MQTT topic filter: '+' matches exactly one level, a trailing
/// '#' matches the remainder of the name including zero levels.
class TopicFilter {
 public:
  static std::optional<TopicFilter> parse(std::string_view s);

  /// parse() that throws std::invalid_argument; for inputs known to be valid.
  static TopicFilter require(std::string_view s);

  const std::string& str() const { return text_; }
  const std::vector<std::string>& levels() const { return levels_; }
  size_t overhead_bytes() const { return text_.size(); }
  bool has_wildcard() const { return wildcard_; }

  bool matches(const TopicName& name) const;

  bool operator==(const TopicFilter&) const = default;
  auto operator<=>(const TopicFilter& o) const { return text_ <=> o.text_; }

 private:
  std::string text_;
  std::vector<std::string> levels_;
  bool wildcard_ = false;
};

std::vector<std::string> split_topic_levels(std::string_view s);

/// Level-indexed subscription store. Lookup cost is bounded by filter depth,
/// not by the number of stored filters. Values attach per inserted filter.
template <typename V>
class SubscriptionTrie {
 public:
  void insert(const TopicFilter& f, V value) {
    Node* n = &root_;
    for (const auto& level : f.levels()) {
      if (level == "#") {
        n->hash_values.push_back(std::move(value));
        ++size_;
        return;
      }
      Node*& slot = level == "+" ? n->plus : n->children[level];
      if (!slot) slot = new Node();
      n = slot;
    }
    n->values.push_back(std::move(value));
    ++size_;
  }

  /// Remove every value stored under an exactly equal filter string.
  /// Returns the number of values removed.
  size_t erase(const TopicFilter& f) {
    return erase_if(f, [](const V&) { return true; });
  }

  /// Remove values under an exactly equal filter string for which the
  /// predicate holds. Returns the number of values removed.
  template <typename Pred>
  size_t erase_if(const TopicFilter& f, Pred&& pred) {
    Node* n = &root_;
    bool hash_tail = false;
    for (const auto& level : f.levels()) {
      if (level == "#") {
        hash_tail = true;
        break;
      }
      Node* next = nullptr;
      if (level == "+") {
        next = n->plus;
      } else {
        auto it = n->children.find(level);
        next = it == n->children.end() ? nullptr : it->second;
      }
      if (!next) return 0;
      n = next;
    }
    auto& vec = hash_tail ? n->hash_values : n->values;
    size_t before = vec.size();
    std::erase_if(vec, pred);
    size_ -= before - vec.size();
    return before - vec.size();
  }

  /// Collect all values whose filter matches `name`.
  std::vector<V> match(const TopicName& name) const {
    std::vector<V> out;
    collect(&root_, name.levels(), 0, out);
    return out;
  }

  template <typename Fn>
  void for_each_match(const TopicName& name, Fn&& fn) const {
    for (const V& v : match(name)) fn(v);
  }

  size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  SubscriptionTrie() = default;
  SubscriptionTrie(const SubscriptionTrie&) = delete;
  SubscriptionTrie& operator=(const SubscriptionTrie&) = delete;
  ~SubscriptionTrie() { clear_node(root_); }

 private:
  struct Node {
    std::map<std::string, Node*> children;
    Node* plus = nullptr;
    std::vector<V> values;       ///< filters terminating at this level
    std::vector<V> hash_values;  ///< filters ending in '#' below this level
  };

  static void clear_node(Node& n) {
    for (auto& [_, c] : n.children) {
      clear_node(*c);
      delete c;
    }
    if (n.plus) {
      clear_node(*n.plus);
      delete n.plus;
    }
  }

  void collect(const Node* n, const std::vector<std::string>& levels, size_t i,
               std::vector<V>& out) const {
    for (const V& v : n->hash_values) out.push_back(v);
    if (i == levels.size()) {
      for (const V& v : n->values) out.push_back(v);
      return;
    }
    auto it = n->children.find(levels[i]);
    if (it != n->children.end()) collect(it->second, levels, i + 1, out);
    if (n->plus) collect(n->plus, levels, i + 1, out);
  }

  Node root_;
  size_t size_ = 0;
};

}  // namespace bridgebench
