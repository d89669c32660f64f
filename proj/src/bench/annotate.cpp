#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "omk/bench.hpp"
#include "omk/error.hpp"
#include "omk/rng.hpp"

namespace omk::bench {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string fill(std::string_view sentence, std::string_view value) {
  std::string out(sentence);
  const auto pos = out.find("{value}");
  if (pos != std::string::npos) {
    out.replace(pos, 7, value);
  }
  return out;
}

AnnotationOutcome parse_provider_body(const std::string& body) {
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    return AnnotationFailure{FailureKind::malformed, "provider response is not a JSON object"};
  }
  if (auto r = doc.find("refusal"); r != doc.end() && !r->is_null()) {
    return AnnotationFailure{FailureKind::refusal, r->is_string() ? r->get<std::string>() : r->dump()};
  }
  auto t = doc.find("text");
  if (t == doc.end() || !t->is_string()) {
    return AnnotationFailure{FailureKind::malformed, "provider response lacks a string \"text\" field"};
  }
  auto inner = nlohmann::json::parse(t->get<std::string>(), nullptr, false);
  if (inner.is_discarded() || !inner.is_object()) {
    return AnnotationFailure{FailureKind::malformed, "provider text is not a JSON object"};
  }
  auto ins = inner.find("instruction");
  auto out = inner.find("output");
  if (ins == inner.end() || out == inner.end() || !ins->is_string() || !out->is_string() ||
      ins->get<std::string>().empty() || out->get<std::string>().empty()) {
    return AnnotationFailure{FailureKind::malformed, "provider text needs non-empty \"instruction\" and \"output\""};
  }
  return Annotation{ins->get<std::string>(), out->get<std::string>()};
}

} // namespace

std::string_view to_string(FailureKind k) {
  switch (k) {
  case FailureKind::invalid_request:
    return "invalid_request";
  case FailureKind::transport:
    return "transport";
  case FailureKind::timeout:
    return "timeout";
  case FailureKind::refusal:
    return "refusal";
  case FailureKind::malformed:
    return "malformed";
  }
  return "unknown";
}

const MockTemplates& MockTemplates::defaults() {
  static const MockTemplates t{
      {"Explain the contents of this song.", "Describe this music clip.",
       "What can you tell me about this piece of music?", "Give a detailed description of the music you hear.",
       "Write a caption for this music clip."},
      {"tempo", "energy", "valence", "danceability", "genre", "mood", "instrument", "others"},
      {{"tempo", "The clip moves at a {value}."},
       {"energy", "It carries {value}."},
       {"valence", "Its emotional tone reflects {value}."},
       {"danceability", "Rhythmically it is {value}."},
       {"genre", "It combines elements from {value}."},
       {"mood", "The atmosphere is {value}."},
       {"instrument", "You can hear {value}."},
       {"others", "It is further tagged as {value}."}}};
  return t;
}

MockTemplates MockTemplates::from_json(const nlohmann::json& j) {
  MockTemplates t;
  t.instructions = j.at("instructions").get<std::vector<std::string>>();
  t.order = j.at("order").get<std::vector<std::string>>();
  t.sentences = j.at("sentences").get<std::map<std::string, std::string>>();
  if (t.instructions.empty()) {
    throw Error("mock templates need at least one instruction");
  }
  for (const auto& key : t.order) {
    auto it = t.sentences.find(key);
    if (it == t.sentences.end() || it->second.find("{value}") == std::string::npos) {
      throw Error("mock templates need a sentence with {value} for " + key);
    }
  }
  return t;
}

nlohmann::json MockTemplates::to_json() const {
  return {{"instructions", instructions}, {"order", order}, {"sentences", sentences}};
}

MockAnnotationClient::MockAnnotationClient(MockTemplates templates) : templates_(std::move(templates)) {
  if (templates_.instructions.empty()) {
    throw Error("mock templates need at least one instruction");
  }
}

AnnotationOutcome MockAnnotationClient::annotate(std::string_view prompt) const {
  if (trim(prompt).empty()) {
    return AnnotationFailure{FailureKind::invalid_request, "empty prompt"};
  }
  std::map<std::string, std::string, std::less<>> attrs;
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    auto eol = prompt.find('\n', pos);
    if (eol == std::string_view::npos) {
      eol = prompt.size();
    }
    const auto line = trim(prompt.substr(pos, eol - pos));
    pos = eol + 1;
    if (!line.starts_with("- ")) {
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      continue;
    }
    const auto key = trim(line.substr(2, colon - 2));
    const auto value = trim(line.substr(colon + 1));
    if (!value.empty() && templates_.sentences.contains(std::string(key))) {
      attrs.emplace(std::string(key), std::string(value));
    }
  }
  if (attrs.empty()) {
    return AnnotationFailure{FailureKind::invalid_request, "prompt carries no metadata attributes"};
  }
  std::string output;
  for (const auto& key : templates_.order) {
    auto it = attrs.find(key);
    if (it == attrs.end()) {
      continue;
    }
    if (!output.empty()) {
      output += ' ';
    }
    output += fill(templates_.sentences.at(key), it->second);
  }
  const auto pick = fnv1a(prompt) % templates_.instructions.size();
  return Annotation{templates_.instructions[pick], output};
}

RemoteAnnotationClient::RemoteAnnotationClient(RemoteConfig config) : config_(std::move(config)) {
  const auto scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos || config_.endpoint.substr(0, scheme) != "http") {
    throw Error("annotation endpoint must be an http:// URL: " + config_.endpoint);
  }
  const auto slash = config_.endpoint.find('/', scheme + 3);
  base_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : config_.endpoint.substr(slash);
  if (config_.max_attempts < 1) {
    throw Error("annotation client needs at least one attempt");
  }
}

AnnotationOutcome RemoteAnnotationClient::annotate(std::string_view prompt) const {
  if (trim(prompt).empty()) {
    return AnnotationFailure{FailureKind::invalid_request, "empty prompt"};
  }
  httplib::Client client(base_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.token.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.token);
  }
  const std::string body = nlohmann::json{{"prompt", std::string(prompt)}}.dump();

  AnnotationFailure last{FailureKind::transport, "no attempt made"};
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(config_.backoff_base * (1LL << (attempt - 1)));
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                             err == httplib::Error::Write;
      last = {timed_out ? FailureKind::timeout : FailureKind::transport,
              "request to " + config_.endpoint + " failed: " + httplib::to_string(err)};
      continue;
    }
    const int status = res->status;
    if (status == 408 || status == 429 || status >= 500) {
      last = {status == 408 ? FailureKind::timeout : FailureKind::transport,
              "provider returned HTTP " + std::to_string(status)};
      continue;
    }
    if (status >= 400) {
      return AnnotationFailure{FailureKind::refusal, "provider returned HTTP " + std::to_string(status)};
    }
    return parse_provider_body(res->body);
  }
  last.message += " (after " + std::to_string(config_.max_attempts) + " attempts)";
  return last;
}

std::string annotation_token_from_env() {
  const char* v = std::getenv("OMK_ANNOTATION_TOKEN");
  return v == nullptr ? std::string() : std::string(v);
}

std::vector<AnnotationOutcome> annotate_all(const AnnotationClient& client, const std::vector<std::string>& prompts,
                                            std::size_t max_in_flight) {
  std::vector<AnnotationOutcome> results(prompts.size());
  const std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), prompts.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        results[i] = client.annotate(prompts[i]);
      } catch (const std::exception& e) {
        results[i] = AnnotationFailure{FailureKind::transport, e.what()};
      }
    }
  };
  if (workers <= 1) {
    work();
    return results;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back(work);
  }
  pool.clear();
  return results;
}

} // namespace omk::bench
