#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "omk/bench.hpp"
#include "omk/error.hpp"

namespace omk::bench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<double> optional_number(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      continue;
    }
    if (!it->is_number()) {
      throw Error(std::string("metadata field ") + key + " must be a number");
    }
    return it->get<double>();
  }
  return std::nullopt;
}

std::vector<std::string> tag_list(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      continue;
    }
    if (it->is_string()) {
      return {it->get<std::string>()};
    }
    if (!it->is_array()) {
      throw Error(std::string("metadata field ") + key + " must be a string or a list of strings");
    }
    std::vector<std::string> out;
    for (const auto& v : *it) {
      if (!v.is_string()) {
        throw Error(std::string("metadata field ") + key + " must contain only strings");
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  }
  return {};
}

void check_score(const std::optional<double>& s, const char* name) {
  if (s && !(*s >= 0.0 && *s <= 1.0)) {
    throw Error(std::string(name) + " score must lie in [0, 1]");
  }
}

std::string normalize_space(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string apply(const std::map<std::string, std::string>& rules, std::string s) {
  auto it = rules.find(s);
  return it == rules.end() ? s : it->second;
}

std::map<std::string, std::string> normalized_rules(const std::map<std::string, std::string>& in) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : in) {
    out[normalize_space(k)] = normalize_space(v);
  }
  return out;
}

std::map<std::string, std::string> rule_map(const nlohmann::json& j, const char* key) {
  std::map<std::string, std::string> out;
  if (auto it = j.find(key); it != j.end()) {
    for (const auto& [k, v] : it->items()) {
      out[k] = v.get<std::string>();
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) {
      out += ", ";
    }
    out += s;
  }
  return out;
}

std::vector<std::string> canonical_tags(const std::vector<std::string>& tags, const TagRules& rules) {
  std::vector<std::string> out;
  for (const auto& t : tags) {
    auto c = rules.canonicalize(t);
    if (!c.empty() && std::find(out.begin(), out.end(), c) == out.end()) {
      out.push_back(std::move(c));
    }
  }
  return out;
}

} // namespace

ClipMetadata metadata_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw Error("metadata must be a JSON object");
  }
  ClipMetadata m;
  m.dataset_name = j.value("dataset_name", std::string());
  m.audio_filename = j.value("audio_filename", std::string());
  if (m.dataset_name.empty() || m.audio_filename.empty()) {
    throw Error("metadata requires non-empty dataset_name and audio_filename");
  }
  m.tempo_bpm = optional_number(j, {"tempo_bpm", "tempo"});
  if (m.tempo_bpm && !(*m.tempo_bpm > 0.0)) {
    throw Error("tempo must be positive");
  }
  m.energy = optional_number(j, {"energy"});
  m.valence = optional_number(j, {"valence"});
  m.danceability = optional_number(j, {"danceability"});
  check_score(m.energy, "energy");
  check_score(m.valence, "valence");
  check_score(m.danceability, "danceability");
  m.genres = tag_list(j, {"genres", "genre"});
  m.moods = tag_list(j, {"moods", "mood"});
  m.instruments = tag_list(j, {"instruments", "instrument"});
  m.others = tag_list(j, {"others", "other"});
  return m;
}

TempoTermTable::TempoTermTable(std::vector<TempoTerm> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) {
    throw Error("tempo table must not be empty");
  }
  if (rows_.front().lower_bpm != 0.0 || rows_.back().upper_bpm != kInf) {
    throw Error("tempo table must cover (0, inf)");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].term.empty() || rows_[i].phrase.empty()) {
      throw Error("tempo table rows need a term and a phrase");
    }
    if (!(rows_[i].lower_bpm < rows_[i].upper_bpm)) {
      throw Error("tempo table interval for " + rows_[i].term + " is empty");
    }
    if (i > 0 && rows_[i].lower_bpm != rows_[i - 1].upper_bpm) {
      throw Error("tempo table intervals must be contiguous at " + rows_[i].term);
    }
  }
}

const TempoTermTable& TempoTermTable::defaults() {
  static const TempoTermTable table({{"grave", "very slow", 0.0, 40.0},
                                     {"largo", "broad", 40.0, 60.0},
                                     {"adagio", "slow", 60.0, 76.0},
                                     {"andante", "walking pace", 76.0, 108.0},
                                     {"moderato", "moderate", 108.0, 120.0},
                                     {"allegro", "fast", 120.0, 156.0},
                                     {"presto", "very fast", 156.0, 200.0},
                                     {"prestissimo", "extremely fast", 200.0, kInf}});
  return table;
}

// Rows: {"term", "phrase", "lower_bpm" (null = 0), "upper_bpm" (null = inf)}.
TempoTermTable TempoTermTable::from_json(const nlohmann::json& j) {
  std::vector<TempoTerm> rows;
  for (const auto& r : j.at("rows")) {
    const auto& lo = r.at("lower_bpm");
    const auto& hi = r.at("upper_bpm");
    rows.push_back({r.at("term").get<std::string>(), r.at("phrase").get<std::string>(),
                    lo.is_null() ? 0.0 : lo.get<double>(), hi.is_null() ? kInf : hi.get<double>()});
  }
  return TempoTermTable(std::move(rows));
}

nlohmann::json TempoTermTable::to_json() const {
  auto rows = nlohmann::json::array();
  for (const auto& r : rows_) {
    rows.push_back({{"term", r.term},
                    {"phrase", r.phrase},
                    {"lower_bpm", r.lower_bpm == 0.0 ? nlohmann::json(nullptr) : nlohmann::json(r.lower_bpm)},
                    {"upper_bpm", r.upper_bpm == kInf ? nlohmann::json(nullptr) : nlohmann::json(r.upper_bpm)}});
  }
  return {{"rows", rows}};
}

const TempoTerm& TempoTermTable::lookup(double bpm) const {
  if (!(bpm > 0.0) || !std::isfinite(bpm)) {
    throw Error("tempo must be a positive finite BPM value");
  }
  auto it = std::upper_bound(rows_.begin(), rows_.end(), bpm,
                             [](double v, const TempoTerm& r) { return v < r.upper_bpm; });
  return *it;
}

std::string tempo_to_term(double bpm, const TempoTermTable& table) { return table.lookup(bpm).phrase + " tempo"; }

std::string level_to_term(double score, Attribute attribute) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error("score must lie in [0, 1]");
  }
  const int level = score >= 0.7 ? 2 : score >= 0.3 ? 1 : 0;
  switch (attribute) {
  case Attribute::energy:
    return std::string(level == 2 ? "high" : level == 1 ? "medium" : "low") + " energy";
  case Attribute::valence:
    return std::string(level == 2 ? "high" : level == 1 ? "medium" : "low") + " valence";
  case Attribute::danceability:
    return level == 2 ? "highly danceable" : level == 1 ? "medium danceable" : "not danceable";
  }
  throw Error("unknown attribute");
}

TagRules::TagRules(std::map<std::string, std::string> decompound, std::map<std::string, std::string> unify,
                   std::map<std::string, std::string> expand)
    : decompound_(normalized_rules(decompound)), unify_(normalized_rules(unify)), expand_(normalized_rules(expand)) {
  for (const auto* rules : {&decompound_, &unify_, &expand_}) {
    for (const auto& [from, to] : *rules) {
      if (to.empty()) {
        throw Error("tag rule for '" + from + "' maps to an empty tag");
      }
      const auto once = canonicalize(from);
      if (canonicalize(once) != once) {
        throw Error("tag rules are not idempotent: '" + from + "' -> '" + once + "' -> '" + canonicalize(once) + "'");
      }
    }
  }
}

const TagRules& TagRules::defaults() {
  static const TagRules rules(
      {{"acousticguitar", "acoustic guitar"},
       {"electricguitar", "electric guitar"},
       {"hiphop", "hip hop"},
       {"triphop", "trip hop"},
       {"drumandbass", "drum and bass"},
       {"easylistening", "easy listening"}},
      {{"female vocalists", "female vocal"},
       {"female vocals", "female vocal"},
       {"female voice", "female vocal"},
       {"male vocalists", "male vocal"},
       {"male vocals", "male vocal"},
       {"male voice", "male vocal"},
       {"hip-hop", "hip hop"},
       {"rnb", "r&b"}},
      {{"synth", "synthesizer"},
       {"sax", "saxophone"},
       {"electro", "electronic"},
       {"orchestral", "orchestra"},
       {"drum", "drums"}});
  return rules;
}

TagRules TagRules::from_json(const nlohmann::json& j) {
  return TagRules(rule_map(j, "decompound"), rule_map(j, "unify"), rule_map(j, "expand"));
}

nlohmann::json TagRules::to_json() const {
  return {{"decompound", decompound_}, {"unify", unify_}, {"expand", expand_}};
}

std::string TagRules::canonicalize(std::string_view tag) const {
  return apply(expand_, apply(unify_, apply(decompound_, normalize_space(tag))));
}

std::string canonicalize_tag(std::string_view tag, const TagRules& rules) { return rules.canonicalize(tag); }

NormalizedMetadata normalize_metadata(const ClipMetadata& meta, const TempoTermTable& tempo, const TagRules& rules) {
  NormalizedMetadata out;
  out["dataset"] = meta.dataset_name;
  out["audio_filename"] = meta.audio_filename;
  if (meta.tempo_bpm) {
    out["tempo"] = tempo_to_term(*meta.tempo_bpm, tempo);
  }
  if (meta.energy) {
    out["energy"] = level_to_term(*meta.energy, Attribute::energy);
  }
  if (meta.valence) {
    out["valence"] = level_to_term(*meta.valence, Attribute::valence);
  }
  if (meta.danceability) {
    out["danceability"] = level_to_term(*meta.danceability, Attribute::danceability);
  }
  const std::pair<const char*, const std::vector<std::string>*> lists[] = {
      {"genre", &meta.genres}, {"mood", &meta.moods}, {"instrument", &meta.instruments}, {"others", &meta.others}};
  for (const auto& [key, tags] : lists) {
    const auto c = canonical_tags(*tags, rules);
    if (!c.empty()) {
      out[key] = join(c);
    }
  }
  return out;
}

nlohmann::ordered_json normalized_json(const ClipMetadata& meta, const TempoTermTable& tempo, const TagRules& rules) {
  nlohmann::ordered_json j;
  j["dataset_name"] = meta.dataset_name;
  j["audio_filename"] = meta.audio_filename;
  if (meta.tempo_bpm) {
    j["tempo"] = tempo_to_term(*meta.tempo_bpm, tempo);
  }
  if (meta.valence) {
    j["valence"] = level_to_term(*meta.valence, Attribute::valence);
  }
  if (meta.energy) {
    j["energy"] = level_to_term(*meta.energy, Attribute::energy);
  }
  if (meta.danceability) {
    j["danceability"] = level_to_term(*meta.danceability, Attribute::danceability);
  }
  const std::pair<const char*, const std::vector<std::string>*> lists[] = {
      {"genre", &meta.genres}, {"mood", &meta.moods}, {"instrument", &meta.instruments}, {"others", &meta.others}};
  for (const auto& [key, tags] : lists) {
    const auto c = canonical_tags(*tags, rules);
    if (!c.empty()) {
      j[key] = c;
    }
  }
  return j;
}

} // namespace omk::bench
