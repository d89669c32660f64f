#include "omk/bench.hpp"
#include "omk/error.hpp"

namespace omk::bench {

namespace {

constexpr const char* kMetadataBlock = "Metadata:\n"
                                       "[[- tempo: {tempo}\n]]"
                                       "[[- energy: {energy}\n]]"
                                       "[[- valence: {valence}\n]]"
                                       "[[- danceability: {danceability}\n]]"
                                       "[[- genre: {genre}\n]]"
                                       "[[- mood: {mood}\n]]"
                                       "[[- instrument: {instrument}\n]]"
                                       "[[- others: {others}\n]]";

// Substitutes placeholders in [begin, end). Returns false when a placeholder
// has no value; `out` is then unspecified.
bool substitute(std::string_view text, const NormalizedMetadata& values, std::string& out, std::string& missing) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      if (text[i] == '}') {
        throw Error("prompt template has an unmatched '}'");
      }
      out += text[i++];
      continue;
    }
    const auto close = text.find('}', i);
    if (close == std::string_view::npos) {
      throw Error("prompt template has an unterminated placeholder");
    }
    const std::string name(text.substr(i + 1, close - i - 1));
    if (name.empty() || name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") != std::string::npos) {
      throw Error("prompt template has an invalid placeholder {" + name + "}");
    }
    auto it = values.find(name);
    if (it == values.end() || it->second.empty()) {
      missing = name;
      return false;
    }
    out += it->second;
    i = close + 1;
  }
  return true;
}

} // namespace

const std::vector<PromptTemplate>& default_prompt_templates() {
  static const std::vector<PromptTemplate> templates{
      {"captioning",
       std::string("You are an expert in music production, music theory and music history. You are listening to a "
                   "short music clip from the {dataset} dataset, described by the metadata below.\n\n") +
           kMetadataBlock +
           "\nWrite an informative caption that describes the key features and components of the clip, drawing on "
           "the metadata and your own knowledge of music. Do not mention the metadata itself. Reply with a JSON "
           "object with the keys \"instruction\" (a request a listener might make about the clip) and \"output\" "
           "(the caption)."},
      {"reasoning",
       std::string("You are an expert in music production, music theory and music history. You are listening to a "
                   "short music clip from the {dataset} dataset, described by the metadata below.\n\n") +
           kMetadataBlock +
           "\nWrite a question about the clip that requires reasoning beyond the metadata, such as where the music "
           "would fit or how it would make a listener feel, and answer it with a short explanation. Do not mention "
           "the metadata itself. Reply with a JSON object with the keys \"instruction\" (the question) and "
           "\"output\" (the answer)."}};
  return templates;
}

std::vector<PromptTemplate> prompt_templates_from_json(const nlohmann::json& j) {
  std::vector<PromptTemplate> out;
  for (const auto& t : j.at("templates")) {
    out.push_back({t.at("name").get<std::string>(), t.at("text").get<std::string>()});
  }
  return out;
}

const PromptTemplate& find_template(const std::vector<PromptTemplate>& templates, std::string_view name) {
  for (const auto& t : templates) {
    if (t.name == name) {
      return t;
    }
  }
  throw Error("unknown prompt template " + std::string(name));
}

std::string render_prompt(const PromptTemplate& tmpl, const NormalizedMetadata& values) {
  const std::string_view text = tmpl.text;
  std::string out;
  std::string missing;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto open = text.find("[[", i);
    const auto plain = text.substr(i, open == std::string_view::npos ? std::string_view::npos : open - i);
    if (plain.find("]]") != std::string_view::npos) {
      throw Error("prompt template " + tmpl.name + " has an unmatched ']]'");
    }
    if (!substitute(plain, values, out, missing)) {
      throw Error("prompt template " + tmpl.name + " needs {" + missing + "}, which the metadata lacks");
    }
    if (open == std::string_view::npos) {
      break;
    }
    const auto close = text.find("]]", open + 2);
    if (close == std::string_view::npos) {
      throw Error("prompt template " + tmpl.name + " has an unterminated [[ clause");
    }
    const auto clause = text.substr(open + 2, close - open - 2);
    if (clause.find("[[") != std::string_view::npos) {
      throw Error("prompt template " + tmpl.name + " nests [[ clauses");
    }
    std::string rendered;
    if (substitute(clause, values, rendered, missing)) {
      out += rendered;
    }
    i = close + 2;
  }
  return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const ClipMetadata& meta) {
  return render_prompt(tmpl, normalize_metadata(meta));
}

} // namespace omk::bench
