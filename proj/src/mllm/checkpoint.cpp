#include "omk/error.hpp"
#include "omk/io.hpp"
#include "omk/mllm.hpp"

namespace omk::mllm {

namespace {

constexpr const char* kFormat = "omk-checkpoint-v1";

std::optional<Group> parse_group(std::string_view s) {
  for (auto g : {Group::base, Group::projector, Group::lora}) {
    if (to_string(g) == s) {
      return g;
    }
  }
  return std::nullopt;
}

} // namespace

void save_checkpoint(const TinyModel& model, const std::filesystem::path& dir, const nlohmann::json& extra) {
  std::string blob;
  auto tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params()) {
    tensors.push_back({{"name", p.name},
                       {"group", to_string(p.group)},
                       {"shape", {p.rows, p.cols}},
                       {"offset", offset}});
    for (double v : p.value) {
      io::put_f32le(blob, static_cast<float>(v));
    }
    offset += p.value.size();
  }
  nlohmann::json manifest{{"format", kFormat},
                          {"dtype", "float32-le"},
                          {"config", model.config().to_json()},
                          {"seed", model.config().seed},
                          {"tensors", tensors}};
  if (const auto& l = model.lora_config()) {
    manifest["lora"] = {{"rank", l->rank}, {"alpha", l->alpha}};
  } else {
    manifest["lora"] = nullptr;
  }
  if (!extra.is_null()) {
    manifest["extra"] = extra;
  }
  std::filesystem::create_directories(dir);
  io::write_atomic(dir / "tensors.bin", blob);
  io::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

TinyModel load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  if (manifest.value("format", std::string()) != kFormat) {
    throw Error((dir / "manifest.json").string() + ": not an " + kFormat + " manifest");
  }
  TinyModel model(ModelConfig::from_json(manifest.at("config")));
  if (const auto& l = manifest.at("lora"); !l.is_null()) {
    model.attach_lora({l.at("rank").get<std::size_t>(), l.at("alpha").get<double>()}, 0);
  }
  const auto blob = io::read_text(dir / "tensors.bin");
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != model.params().size()) {
    throw Error("checkpoint tensor count does not match the model configuration");
  }
  for (const auto& t : tensors) {
    auto& p = model.param(t.at("name").get<std::string>());
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    const auto group = parse_group(t.at("group").get<std::string>());
    if (shape.size() != 2 || shape[0] != p.rows || shape[1] != p.cols || !group || *group != p.group) {
      throw Error("checkpoint tensor " + p.name + " has an unexpected shape or group");
    }
    const auto offset = t.at("offset").get<std::size_t>();
    if ((offset + p.value.size()) * 4 > blob.size()) {
      throw Error("checkpoint tensor " + p.name + " lies outside tensors.bin");
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.value[i] = io::get_f32le(bytes + (offset + i) * 4);
    }
  }
  return model;
}

} // namespace omk::mllm
