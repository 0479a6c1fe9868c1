#include "bridgebench/topic.hpp"

#include <stdexcept>

namespace bridgebench {

std::vector<std::string> split_topic_levels(std::string_view s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t slash = s.find('/', start);
    if (slash == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, slash - start));
    start = slash + 1;
  }
}

std::optional<TopicName> TopicName::parse(std::string_view s) {
  if (s.empty() || s.size() > 0xffff) return std::nullopt;
  if (s.find_first_of("+#") != std::string_view::npos) return std::nullopt;
  if (s.find('\0') != std::string_view::npos) return std::nullopt;
  TopicName t;
  t.text_ = std::string(s);
  t.levels_ = split_topic_levels(s);
  return t;
}

TopicName TopicName::require(std::string_view s) {
  auto t = parse(s);
  if (!t) throw std::invalid_argument("invalid topic name: " + std::string(s));
  return *t;
}

std::optional<TopicFilter> TopicFilter::parse(std::string_view s) {
  if (s.empty() || s.size() > 0xffff) return std::nullopt;
  if (s.find('\0') != std::string_view::npos) return std::nullopt;
  auto levels = split_topic_levels(s);
  bool wildcard = false;
  for (size_t i = 0; i < levels.size(); ++i) {
    const std::string& l = levels[i];
    if (l == "#") {
      if (i + 1 != levels.size()) return std::nullopt;  // '#' only last
      wildcard = true;
    } else if (l == "+") {
      wildcard = true;
    } else if (l.find_first_of("+#") != std::string::npos) {
      return std::nullopt;  // wildcard must occupy the whole level
    }
  }
  TopicFilter f;
  f.text_ = std::string(s);
  f.levels_ = std::move(levels);
  f.wildcard_ = wildcard;
  return f;
}

TopicFilter TopicFilter::require(std::string_view s) {
  auto f = parse(s);
  if (!f) throw std::invalid_argument("invalid topic filter: " + std::string(s));
  return *f;
}

bool TopicFilter::matches(const TopicName& name) const {
  const auto& fl = levels_;
  const auto& nl = name.levels();
  size_t i = 0;
  for (; i < fl.size(); ++i) {
    if (fl[i] == "#") return true;  // matches remainder, including nothing
    if (i >= nl.size()) return false;
    if (fl[i] == "+") continue;
    if (fl[i] != nl[i]) return false;
  }
  return i == nl.size();
}

}  // namespace bridgebench
