#include <algorithm>
#include <cctype>

#include "omk/error.hpp"
#include "omk/metrics.hpp"

namespace omk::metrics {

char label_char(Label l) { return static_cast<char>('A' + static_cast<int>(l)); }

std::optional<Label> parse_label(char c) {
  if (c >= 'A' && c <= 'D') {
    return static_cast<Label>(c - 'A');
  }
  return std::nullopt;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::optional<Label> parenthesized(std::string_view s) {
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    if (s[i] == '(' && s[i + 2] == ')') {
      if (auto l = parse_label(s[i + 1])) {
        return l;
      }
    }
  }
  return std::nullopt;
}

std::optional<Label> leading_label(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s[1] == ')' || s[1] == '.' || s[1] == ':')) {
    return parse_label(s[0]);
  }
  return std::nullopt;
}

std::string_view strip_end(std::string_view s) {
  s = trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) {
    s.remove_suffix(1);
  }
  return trim(s);
}

std::optional<Label> full_option(std::string_view s, const std::array<std::string, 4>& options) {
  const std::string answer = lower(strip_end(s));
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (!options[i].empty() && answer == lower(strip_end(options[i]))) {
      return static_cast<Label>(i);
    }
  }
  return std::nullopt;
}

std::optional<Label> answer_is(std::string_view s) {
  const std::string text = lower(s);
  constexpr std::string_view phrase = "answer is";
  for (std::size_t pos = text.find(phrase); pos != std::string::npos; pos = text.find(phrase, pos + 1)) {
    std::size_t i = pos + phrase.size();
    while (i < s.size() && (s[i] == ' ' || s[i] == ':')) {
      ++i;
    }
    if (i < s.size() && s[i] == '(') {
      ++i;
    }
    if (i < s.size()) {
      const auto label = parse_label(s[i]);
      const bool bounded = i + 1 >= s.size() || !is_alnum(s[i + 1]);
      if (label && bounded) {
        return label;
      }
    }
  }
  return std::nullopt;
}

} // namespace

Extraction mcq_extract(std::string_view answer, const std::array<std::string, 4>& options) {
  if (auto l = parenthesized(answer)) {
    return *l;
  }
  if (auto l = leading_label(answer)) {
    return *l;
  }
  if (auto l = full_option(answer, options)) {
    return *l;
  }
  if (auto l = answer_is(answer)) {
    return *l;
  }
  return NoFollow{};
}

McqOutcome mcq_score(const std::vector<McqItem>& items) {
  if (items.empty()) {
    throw Error("mcq_score: no items");
  }
  McqOutcome out;
  std::size_t correct = 0;
  std::size_t followed = 0;
  for (const auto& item : items) {
    const auto e = mcq_extract(item.model_answer, item.options);
    if (std::holds_alternative<NoFollow>(e)) {
      out.per_item.push_back(McqVerdict::no_follow);
      continue;
    }
    ++followed;
    if (std::get<Label>(e) == item.gold) {
      ++correct;
      out.per_item.push_back(McqVerdict::correct);
    } else {
      out.per_item.push_back(McqVerdict::wrong);
    }
  }
  const auto n = static_cast<double>(items.size());
  out.accuracy = static_cast<double>(correct) / n;
  out.ifr = static_cast<double>(followed) / n;
  return out;
}

} // namespace omk::metrics
