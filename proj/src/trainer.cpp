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

#include "lvcc/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "lvcc/errors.hpp"
#include "lvcc/log.hpp"

namespace lvcc::train {

using nlohmann::json;

namespace {

std::string schedule_name(Schedule s) { return s == Schedule::kCosine ? "cosine" : "constant"; }

Schedule parse_schedule(const std::string& s) {
  if (s == "constant") return Schedule::kConstant;
  if (s == "cosine") return Schedule::kCosine;
  throw ConfigError("unknown schedule '" + s + "'");
}

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.set_requires_grad(flag);
}

}  // namespace

TrainConfig TrainConfig::for_stage(int stage) {
  TrainConfig c;
  c.stage = stage;
  switch (stage) {
    case 1:
      c.iterations = 200000;
      c.lr_codec = 1e-4;
      c.lr_preedit = 0.0;
      c.schedule = Schedule::kConstant;
      break;
    case 2:
      c.iterations = 150000;
      c.lr_codec = 0.0;
      c.lr_preedit = 1e-4;
      c.lr_final = 1e-6;
      c.schedule = Schedule::kCosine;
      break;
    case 3:
      c.iterations = 150000;
      c.lr_codec = 1e-5;
      c.lr_preedit = 1e-6;
      c.schedule = Schedule::kConstant;
      break;
    default:
      throw ConfigError("stage must be 1, 2 or 3");
  }
  return c;
}

void TrainConfig::validate() const {
  if (stage < 1 || stage > 3) throw ConfigError("stage must be 1, 2 or 3");
  if (iterations <= 0) throw ConfigError("iterations must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (crop_size < 64 || crop_size % 64 != 0) throw ConfigError("crop_size must be a positive multiple of 64");
  if (stage != 2 && !(lr_codec > 0)) throw ConfigError("stage " + std::to_string(stage) + " needs lr_codec > 0");
  if (stage != 1 && !(lr_preedit > 0)) throw ConfigError("stage " + std::to_string(stage) + " needs lr_preedit > 0");
  if (schedule == Schedule::kCosine && !(lr_final > 0)) throw ConfigError("cosine schedule needs lr_final > 0");
  model.validate();
  losses::validate_presets(presets);
  if (static_cast<int>(presets.size()) != model.codec.q_levels) {
    throw ConfigError("need one lambda preset per q level");
  }
}

json TrainConfig::to_json() const {
  json lambdas = json::array();
  for (const auto& p : presets) lambdas.push_back(p.lambda_distortion);
  return json{{"stage", stage},
              {"iterations", iterations},
              {"batch_size", batch_size},
              {"crop_size", crop_size},
              {"lr_codec", lr_codec},
              {"lr_preedit", lr_preedit},
              {"lr_final", lr_final},
              {"schedule", schedule_name(schedule)},
              {"clip_grad_norm", clip_grad_norm},
              {"seed", seed},
              {"dataset_path", dataset_path},
              {"init_checkpoint", init_checkpoint},
              {"output_checkpoint", output_checkpoint},
              {"log_path", log_path},
              {"token_scale_batches", token_scale_batches},
              {"q_sampling", "uniform"},
              {"model", model.to_json()},
              {"lambda_rate", presets.front().lambda_rate},
              {"lambda_distortion", lambdas},
              {"lambda_token", presets.front().lambda_token},
              {"lambda_rank", presets.front().lambda_rank}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  try {
    TrainConfig c = for_stage(j.value("stage", 1));
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.crop_size = j.value("crop_size", c.crop_size);
    c.lr_codec = j.value("lr_codec", c.lr_codec);
    c.lr_preedit = j.value("lr_preedit", c.lr_preedit);
    c.lr_final = j.value("lr_final", c.lr_final);
    if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule").get<std::string>());
    c.clip_grad_norm = j.value("clip_grad_norm", c.clip_grad_norm);
    c.seed = j.value("seed", c.seed);
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    c.init_checkpoint = j.value("init_checkpoint", c.init_checkpoint);
    c.output_checkpoint = j.value("output_checkpoint", c.output_checkpoint);
    c.log_path = j.value("log_path", c.log_path);
    c.token_scale_batches = j.value("token_scale_batches", c.token_scale_batches);
    if (j.contains("q_sampling") && j.at("q_sampling") != "uniform") {
      throw ConfigError("only uniform q_sampling is supported");
    }
    json model = j.value("model", c.model.to_json());
    if (j.contains("extractor")) model["extractor"] = j.at("extractor");
    c.model = ModelConfig::from_json(model);

    c.presets.clear();
    std::vector<double> weights(losses::kDefaultDistortionWeights.begin(),
                                losses::kDefaultDistortionWeights.end());
    if (j.contains("lambda_distortion")) weights = j.at("lambda_distortion").get<std::vector<double>>();
    for (size_t q = 0; q < weights.size(); ++q) {
      losses::LambdaPreset p;
      p.q = QIndex(static_cast<int>(q));
      p.lambda_rate = j.value("lambda_rate", 1.0);
      p.lambda_distortion = weights[q];
      p.lambda_token = j.value("lambda_token", 1.0);
      p.lambda_rank = j.value("lambda_rank", 0.1);
      c.presets.push_back(p);
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

double learning_rate(Schedule schedule, double lr0, double lr_final, int64_t step,
                     int64_t total) {
  if (schedule == Schedule::kConstant || total <= 1) return lr0;
  const double t = static_cast<double>(std::min(step, total - 1)) / static_cast<double>(total - 1);
  return lr_final + 0.5 * (lr0 - lr_final) * (1.0 + std::cos(M_PI * t));
}

std::pair<double, double> smoothed_endpoints(const std::vector<StepLog>& log, size_t window) {
  if (log.empty()) return {0.0, 0.0};
  window = std::min(window, log.size());
  double first = 0, last = 0;
  for (size_t i = 0; i < window; ++i) {
    first += log[i].total;
    last += log[log.size() - 1 - i].total;
  }
  return {first / window, last / window};
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& config, Model& model) : config_(config), model_(model) {
  config_.validate();
  const bool train_codec = config_.stage != 2;
  const bool train_preedit = config_.stage != 1;
  set_requires_grad(*model_.codec(), train_codec);
  set_requires_grad(*model_.preedit(), train_preedit);

  std::vector<torch::optim::OptimizerParamGroup> groups;
  auto options = [](double lr) {
    return std::make_unique<torch::optim::AdamOptions>(
        torch::optim::AdamOptions(lr).betas({kAdamBeta1, kAdamBeta2}));
  };
  if (train_codec) {
    groups.emplace_back(model_.codec()->parameters(), options(config_.lr_codec));
    has_codec_group_ = true;
  }
  if (train_preedit) {
    groups.emplace_back(model_.preedit()->parameters(), options(config_.lr_preedit));
    has_preedit_group_ = true;
  }
  for (const auto& g : groups) params_.insert(params_.end(), g.params().begin(), g.params().end());
  optimizer_ = std::make_unique<torch::optim::Adam>(
      groups, torch::optim::AdamOptions(1e-4).betas({kAdamBeta1, kAdamBeta2}));
}

void Trainer::set_learning_rates(int64_t step) {
  size_t g = 0;
  auto apply = [&](double lr0) {
    auto& opts = static_cast<torch::optim::AdamOptions&>(optimizer_->param_groups()[g++].options());
    opts.lr(learning_rate(config_.schedule, lr0, config_.lr_final, step, config_.iterations));
  };
  if (has_codec_group_) apply(config_.lr_codec);
  if (has_preedit_group_) apply(config_.lr_preedit);
}

void Trainer::estimate_token_scale(data::BatchSampler& sampler) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> all;
  for (int64_t i = 0; i < config_.token_scale_batches; ++i) {
    all.push_back(model_.extractor().extract(sampler.next()).flatten());
  }
  const double scale = torch::cat(all).std().item<double>();
  if (std::isfinite(scale) && scale > 0) {
    model_.set_token_scale(scale);
    log::info("token scale (global std) = " + std::to_string(scale));
  }
}

losses::LossTerms Trainer::compute_loss(const torch::Tensor& batch, QIndex q) {
  const auto& preset = config_.presets.at(static_cast<size_t>(q.value));
  losses::LossInputs in;
  in.original = batch;
  in.pixels = static_cast<double>(batch.size(0) * batch.size(2) * batch.size(3));
  if (config_.stage == 1) {
    auto r = model_.codec()->forward(batch, q, codec::QuantMode::kNoise);
    in.bits = (r.bits_y + r.bits_z).sum();
    in.decoded = r.x_hat;
    return losses::total_loss(in, preset, false);
  }
  torch::Tensor t_gt;
  {
    torch::NoGradGuard no_grad;
    t_gt = model_.tokens(batch);
  }
  auto edited = model_.preedit()->forward(batch, t_gt, q);
  auto r = model_.codec()->forward(edited, q, codec::QuantMode::kNoise);
  in.bits = (r.bits_y + r.bits_z).sum();
  in.decoded = r.x_hat;
  in.t_gt = t_gt;
  in.t_d = model_.tokens(r.x_hat);
  return losses::total_loss(in, preset, true);
}

StepLog Trainer::step(const torch::Tensor& batch, QIndex q, int64_t step_index) {
  set_learning_rates(step_index);
  optimizer_->zero_grad();
  auto terms = compute_loss(batch, q);
  if (!std::isfinite(terms.total.item<double>())) {
    throw NumericError("non-finite loss at step " + std::to_string(step_index));
  }
  terms.total.backward();
  if (config_.clip_grad_norm > 0) torch::nn::utils::clip_grad_norm_(params_, config_.clip_grad_norm);
  optimizer_->step();
  StepLog s;
  s.step = step_index;
  s.q = q.value;
  s.bpp = terms.bpp.item<double>();
  s.mse = terms.mse.item<double>();
  s.tk = terms.tk.item<double>();
  s.rk = terms.rk.item<double>();
  s.total = terms.total.item<double>();
  return s;
}

std::vector<StepLog> Trainer::run(const data::Dataset& dataset) {
  torch::manual_seed(config_.seed);
  std::mt19937_64 rng(config_.seed);
  std::uniform_int_distribution<int> pick_q(0, model_.config().codec.q_levels - 1);
  data::BatchSampler sampler(dataset, config_.batch_size, config_.seed ^ 0x9E3779B97F4A7C15ull);
  model_.codec()->train();
  model_.preedit()->train();
  if (config_.stage == 2) estimate_token_scale(sampler);

  std::ofstream csv;
  if (!config_.log_path.empty()) {
    csv.open(config_.log_path);
    if (!csv) throw IoError("cannot write log " + config_.log_path);
    csv << "step,bpp,mse,tk,rk,total\n" << std::setprecision(9);
  }

  std::vector<StepLog> history;
  history.reserve(static_cast<size_t>(config_.iterations));
  for (int64_t i = 0; i < config_.iterations; ++i) {
    const QIndex q(pick_q(rng));
    auto s = step(sampler.next(), q, i);
    if (csv) csv << s.step << ',' << s.bpp << ',' << s.mse << ',' << s.tk << ',' << s.rk << ',' << s.total << '\n';
    if ((i + 1) % 50 == 0 || i + 1 == config_.iterations) {
      std::ostringstream msg;
      msg << "stage " << config_.stage << " step " << i + 1 << "/" << config_.iterations << " q=" << s.q
          << " bpp=" << s.bpp << " mse=" << s.mse << " loss=" << s.total;
      log::info(msg.str());
    }
    history.push_back(s);
  }
  set_requires_grad(*model_.codec(), true);
  set_requires_grad(*model_.preedit(), true);
  return history;
}

LoadedCheckpoint run_stage(const TrainConfig& config) {
  config.validate();
  LoadedCheckpoint ckpt;
  if (config.init_checkpoint.empty()) {
    if (config.stage != 1) {
      throw ConfigError("stage " + std::to_string(config.stage) + " requires a stage-" +
                        std::to_string(config.stage - 1) + " checkpoint");
    }
    ckpt.model = std::make_unique<Model>(config.model);
  } else {
    ckpt = load_checkpoint(config.init_checkpoint);
    if (ckpt.stage < config.stage - 1) {
      throw ConfigError("stage " + std::to_string(config.stage) + " requires a stage-" +
                        std::to_string(config.stage - 1) + " checkpoint, got stage " +
                        std::to_string(ckpt.stage));
    }
    if (static_cast<int>(config.presets.size()) != ckpt.model->config().codec.q_levels) {
      throw ConfigError("lambda presets do not match the checkpoint's q_levels");
    }
  }
  auto dataset = data::Dataset::load(config.dataset_path, config.crop_size);
  TrainConfig effective = config;
  effective.model = ckpt.model->config();
  Trainer trainer(effective, *ckpt.model);
  trainer.run(dataset);
  ckpt.stage = config.stage;
  ckpt.train_config = config.to_json();
  if (!config.output_checkpoint.empty()) {
    save_checkpoint(config.output_checkpoint, *ckpt.model, config.stage, ckpt.train_config);
    log::info("wrote " + config.output_checkpoint);
  }
  return ckpt;
}

EvalResult evaluate(Model& model, const std::vector<torch::Tensor>& images, QIndex q,
                    bool use_preedit, const losses::LambdaPreset& preset) {
  torch::NoGradGuard no_grad;
  EvalResult acc;
  if (images.empty()) return acc;
  for (const auto& image : images) {
    auto x = codec::pad_to_multiple(image.to(torch::kFloat32)).unsqueeze(0);
    auto t_gt = model.tokens(x);
    auto input = use_preedit ? model.preedit()->forward(x, t_gt, q) : x;
    auto r = model.codec()->forward(input, q, codec::QuantMode::kRound);
    losses::LossInputs in;
    in.bits = (r.bits_y + r.bits_z).sum();
    in.pixels = static_cast<double>(x.size(2) * x.size(3));
    in.original = x;
    in.decoded = r.x_hat;
    in.t_gt = t_gt;
    in.t_d = model.tokens(r.x_hat);
    auto t = losses::total_loss(in, preset, true);
    acc.bpp += t.bpp.item<double>();
    acc.mse += t.mse.item<double>();
    acc.tk += t.tk.item<double>();
    acc.rk += t.rk.item<double>();
    acc.total += t.total.item<double>();
  }
  const double n = static_cast<double>(images.size());
  acc.bpp /= n;
  acc.mse /= n;
  acc.tk /= n;
  acc.rk /= n;
  acc.total /= n;
  return acc;
}

}  // namespace lvcc::train
