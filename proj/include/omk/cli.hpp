#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace omk::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one `omk` command. Exit codes: 0 success, 1 data or validation
/// error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct ToyTrainOptions {
  std::string output_dir;
  std::uint64_t seed = 0;
  std::size_t pool_factor = 16;
  std::size_t n_examples = 32;
  std::size_t pretrain_steps = 1000;
  double pretrain_lr = 3e-3;
  std::size_t stage1_steps = 2000;
  double stage1_lr = 1e-3;
  std::size_t stage2_steps = 0; // 0: default epochs
  double stage2_lr = 2e-5;
  std::size_t lora_rank = 16;
  double lora_alpha = 128.0;
  bool stage2 = true;
};

/// Toy two-stage run: synthetic data, base pretraining, stage 1, stage 2,
/// checkpoint, logs and a report with frozen-group hashes and the white-noise
/// probe. Returns the report.
nlohmann::ordered_json train_toy(const ToyTrainOptions& opt, std::ostream& log);

} // namespace omk::cli
