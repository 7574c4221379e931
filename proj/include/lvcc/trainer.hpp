// Copyright 2026 The LVCC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LVCC_TRAINER_HPP_
#define LVCC_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lvcc/checkpoint.hpp"
#include "lvcc/dataset.hpp"
#include "lvcc/losses.hpp"
#include "lvcc/pipeline.hpp"

namespace lvcc::train {

enum class Schedule { kConstant, kCosine };

inline constexpr double kAdamBeta1 = 0.5;
inline constexpr double kAdamBeta2 = 0.999;

struct TrainConfig {
  int stage = 1;
  int64_t iterations = 200000;
  int64_t batch_size = 8;
  int64_t crop_size = 256;
  double lr_codec = 1e-4;
  double lr_preedit = 1e-4;
  double lr_final = 1e-6;  // end point of the cosine schedule
  Schedule schedule = Schedule::kConstant;
  double clip_grad_norm = 1.0;  // <= 0 disables clipping
  uint64_t seed = 0;
  std::string dataset_path;
  std::string init_checkpoint;  // required for stages 2 and 3
  std::string output_checkpoint;
  std::string log_path;          // per-step CSV; empty disables
  int64_t token_scale_batches = 8;
  ModelConfig model = ModelConfig::tiny();  // used when starting stage 1 fresh
  std::vector<losses::LambdaPreset> presets = losses::default_presets();

  // Published schedule for one stage: 200K / 150K / 150K iterations with the
  // matching learning rates and schedule.
  static TrainConfig for_stage(int stage);

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys take the for_stage() defaults of the given "stage".
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
};

// Learning rate at `step` (0-based) of `total` steps. Cosine runs from
// lr0 at step 0 to lr_final at step total - 1.
double learning_rate(Schedule schedule, double lr0, double lr_final, int64_t step,
                     int64_t total);

struct StepLog {
  int64_t step = 0;
  int q = 0;
  double bpp = 0, mse = 0, tk = 0, rk = 0, total = 0;
};

// Mean of the first and last `window` totals of a log.
std::pair<double, double> smoothed_endpoints(const std::vector<StepLog>& log, size_t window);

// Runs one stage on a model the caller owns. Stage 1 trains the codec
// without token terms, stage 2 trains the pre-edit network against the
// frozen codec, stage 3 fine-tunes both.
class Trainer {
 public:
  Trainer(const TrainConfig& config, Model& model);

  std::vector<StepLog> run(const data::Dataset& dataset);
  // One optimization step on a batch with a fixed q.
  StepLog step(const torch::Tensor& batch, QIndex q, int64_t step_index);

  const torch::optim::Adam& optimizer() const { return *optimizer_; }
  const TrainConfig& config() const { return config_; }

 private:
  losses::LossTerms compute_loss(const torch::Tensor& batch, QIndex q);
  void estimate_token_scale(data::BatchSampler& sampler);
  void set_learning_rates(int64_t step);

  TrainConfig config_;
  Model& model_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  std::vector<torch::Tensor> params_;
  bool has_codec_group_ = false, has_preedit_group_ = false;
};

// Loads the init checkpoint (or builds a fresh model for stage 1), trains,
// writes output_checkpoint and the CSV log. Throws ConfigError if a stage-2
// or stage-3 run lacks its prerequisite checkpoint.
LoadedCheckpoint run_stage(const TrainConfig& config);

// Deterministic held-out loss (rounded latents, estimated bits).
struct EvalResult {
  double bpp = 0, mse = 0, tk = 0, rk = 0, total = 0;
};
EvalResult evaluate(Model& model, const std::vector<torch::Tensor>& images, QIndex q,
                    bool use_preedit, const losses::LambdaPreset& preset);

}  // namespace lvcc::train

#endif  // LVCC_TRAINER_HPP_
