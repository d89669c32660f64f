#include <cstdio>

#include "omk/cli.hpp"
#include "omk/error.hpp"
#include "omk/io.hpp"
#include "omk/metrics.hpp"
#include "omk/mllm.hpp"

namespace omk::cli {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::ordered_json hashes(const mllm::TinyModel& m) {
  nlohmann::ordered_json j;
  for (auto g : {mllm::Group::base, mllm::Group::projector, mllm::Group::lora}) {
    j[std::string(mllm::to_string(g))] = hex(m.group_hash(g));
  }
  return j;
}

} // namespace

nlohmann::ordered_json train_toy(const ToyTrainOptions& opt, std::ostream& log) {
  if (opt.output_dir.empty()) {
    throw UsageError("train-toy needs --output-dir");
  }
  const std::filesystem::path dir = opt.output_dir;
  const auto data = mllm::toy_dataset({opt.n_examples, opt.pool_factor, opt.seed});
  mllm::TinyModel model(mllm::toy_model_config(opt.seed));

  std::vector<std::pair<std::string, std::string>> corpus;
  for (const auto& ex : data) {
    corpus.emplace_back(ex.prompt, ex.target);
  }
  mllm::TrainConfig pre;
  pre.max_steps = opt.pretrain_steps;
  pre.learning_rate = opt.pretrain_lr;
  pre.seed = opt.seed;
  const auto pre_log = mllm::pretrain_base(model, corpus, pre);
  log << "pretrain: " << pre_log.size() << " steps, final batch loss " << pre_log.back().loss << "\n";

  nlohmann::ordered_json report;
  report["tokenizer_version"] = std::string("byte-level-258");
  report["metric_tokenizer_version"] = metrics::kTokenizerVersion;
  report["pool_factor"] = opt.pool_factor;
  report["lora"] = {{"rank", opt.lora_rank}, {"alpha", opt.lora_alpha}};
  report["seed"] = opt.seed;
  report["n_examples"] = data.size();
  report["model"] = model.config().to_json();

  const auto before1 = hashes(model);
  const double loss0 = mllm::dataset_loss(model, data);
  auto cfg1 = mllm::TrainConfig::for_stage(mllm::Stage::stage1);
  cfg1.max_steps = opt.stage1_steps;
  cfg1.learning_rate = opt.stage1_lr;
  cfg1.seed = opt.seed;
  const auto log1 = mllm::train_stage(model, data, cfg1);
  const double loss1 = mllm::dataset_loss(model, data);
  const auto after1 = hashes(model);
  log << "stage1: loss " << loss0 << " -> " << loss1 << "\n";
  report["stage1"] = {{"config", cfg1.to_json()},
                      {"initial_loss", loss0},
                      {"final_loss", loss1},
                      {"loss_ratio", loss1 / loss0},
                      {"hashes_before", before1},
                      {"hashes_after", after1},
                      {"base_unchanged", before1["base"] == after1["base"]}};

  io::write_atomic(dir / "pretrain_log.jsonl", mllm::log_to_jsonl(pre_log));
  io::write_atomic(dir / "stage1_log.jsonl", mllm::log_to_jsonl(log1));

  if (opt.stage2) {
    model.attach_lora({opt.lora_rank, opt.lora_alpha}, opt.seed + 1);
    const auto before2 = hashes(model);
    auto cfg2 = mllm::TrainConfig::for_stage(mllm::Stage::stage2);
    cfg2.max_steps = opt.stage2_steps;
    cfg2.learning_rate = opt.stage2_lr;
    cfg2.seed = opt.seed;
    const auto log2 = mllm::train_stage(model, data, cfg2);
    const double loss2 = mllm::dataset_loss(model, data);
    const auto after2 = hashes(model);
    log << "stage2: loss " << loss1 << " -> " << loss2 << "\n";
    report["stage2"] = {{"config", cfg2.to_json()},
                        {"initial_loss", loss1},
                        {"final_loss", loss2},
                        {"hashes_before", before2},
                        {"hashes_after", after2},
                        {"base_unchanged", before2["base"] == after2["base"]}};
    io::write_atomic(dir / "stage2_log.jsonl", mllm::log_to_jsonl(log2));
  }

  const auto probe = mllm::make_probe(data, opt.seed + 7);
  const auto ablation = mllm::white_noise_ablation(model, probe, opt.pool_factor, opt.seed + 11);
  report["probe"] = {{"n_items", probe.size()},
                     {"accuracy_true_clips", 100.0 * ablation.true_accuracy},
                     {"accuracy_white_noise", 100.0 * ablation.noise_accuracy}};
  log << "probe: true clips " << 100.0 * ablation.true_accuracy << "%, white noise "
      << 100.0 * ablation.noise_accuracy << "%\n";

  mllm::save_checkpoint(model, dir / "checkpoint", {{"pool_factor", opt.pool_factor}});
  io::write_atomic(dir / "report.json", report.dump(2) + "\n");
  return report;
}

} // namespace omk::cli
