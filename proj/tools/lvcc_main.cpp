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

// lvcc: train, code, and evaluate the token-guided image codec.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "lvcc/bytes.hpp"
#include "lvcc/checkpoint.hpp"
#include "lvcc/dataset.hpp"
#include "lvcc/errors.hpp"
#include "lvcc/evalkit.hpp"
#include "lvcc/log.hpp"
#include "lvcc/pipeline.hpp"
#include "lvcc/tokens.hpp"
#include "lvcc/trainer.hpp"

namespace fs = std::filesystem;
using namespace lvcc;

namespace {

std::vector<fs::path> image_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

QIndex checked_q(int q, const Model& model) {
  QIndex idx(q);
  check_q(idx, model.config().codec.q_levels);
  return idx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lvcc: token-guided learned image compression"};
  app.require_subcommand(1);
  uint64_t seed = 0;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  // train
  auto* train = app.add_subcommand("train", "Run one training stage from a JSON config");
  std::string train_config, resume;
  std::optional<uint64_t> train_seed;
  train->add_option("--config", train_config, "Stage config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Checkpoint to start from (overrides init_checkpoint)");
  train->add_option("--seed", train_seed, "Override the config seed");

  // encode
  auto* encode = app.add_subcommand("encode", "Compress an image");
  std::string enc_input, enc_model, enc_output, enc_tokens, enc_extractor;
  int enc_q = 0;
  bool no_preedit = false;
  encode->add_option("--input", enc_input, "Input image")->required()->check(CLI::ExistingFile);
  encode->add_option("--q", enc_q, "Quality index")->required();
  encode->add_option("--model", enc_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  encode->add_option("--output", enc_output, "Output .lvcc file")->required();
  encode->add_flag("--no-preedit", no_preedit, "Skip the pre-editing network");
  auto* tok_opt = encode->add_option("--tokens", enc_tokens, "Precomputed .tok file")->check(CLI::ExistingFile);
  encode->add_option("--extractor", enc_extractor, "Token extractor (must match the model)")->excludes(tok_opt);
  encode->add_option("--seed", seed, "Seed (coding itself is deterministic)");

  // decode
  auto* decode = app.add_subcommand("decode", "Decompress a .lvcc file");
  std::string dec_input, dec_model, dec_output;
  decode->add_option("--input", dec_input, "Input .lvcc file")->required()->check(CLI::ExistingFile);
  decode->add_option("--model", dec_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  decode->add_option("--output", dec_output, "Output image")->required();

  // tokens
  auto* tok = app.add_subcommand("tokens", "Extract semantic tokens to a .tok file");
  std::string tok_input, tok_output;
  tokens::ExtractorSpec tok_spec;
  tok->add_option("--input", tok_input, "Input image")->required()->check(CLI::ExistingFile);
  tok->add_option("--extractor", tok_spec.name, "toy or patch-embed")->required();
  tok->add_option("--output", tok_output, "Output .tok file")->required();
  tok->add_option("--dim", tok_spec.dim, "Token dimension");
  tok->add_option("--patch", tok_spec.patch, "Patch size");
  tok->add_option("--seed", tok_spec.seed, "Extractor weight seed");

  // curve
  auto* curve = app.add_subcommand("curve", "Rate-accuracy curve over a directory");
  std::string cur_dir, cur_model, cur_metric = "psnr", cur_out, cur_svg;
  bool cur_no_preedit = false;
  curve->add_option("--dir", cur_dir, "Image directory")->required();
  curve->add_option("--model", cur_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  curve->add_option("--metric", cur_metric, "Metric plugin (psnr)");
  curve->add_option("--out", cur_out, "Output CSV")->required();
  curve->add_option("--svg", cur_svg, "Also plot the curve to an SVG file");
  curve->add_flag("--no-preedit", cur_no_preedit, "Skip the pre-editing network");
  curve->add_option("--seed", seed, "Seed (coding itself is deterministic)");

  // bdrate
  auto* bd = app.add_subcommand("bdrate", "BD-rate of a test curve against an anchor");
  std::string bd_anchor, bd_test;
  bd->add_option("--anchor", bd_anchor, "Anchor CSV")->required()->check(CLI::ExistingFile);
  bd->add_option("--test", bd_test, "Test CSV")->required()->check(CLI::ExistingFile);

  // report-complexity
  auto* cx = app.add_subcommand("report-complexity", "FLOPs, parameters and runtime per module");
  std::string cx_model, cx_config = "full";
  int cx_runs = 10;
  int64_t cx_probe = 256;
  cx->add_option("--model", cx_model, "Checkpoint (default: untrained model)")->check(CLI::ExistingFile);
  cx->add_option("--config", cx_config, "Model preset when no checkpoint is given")
      ->check(CLI::IsMember({"full", "tiny"}));
  cx->add_option("--runs", cx_runs, "Timed runs (median reported)")->check(CLI::Range(1, 1000));
  cx->add_option("--probe", cx_probe, "Probe image side")->check(CLI::Range(64, 4096));
  cx->add_option("--seed", seed, "Seed for the probe image and untrained weights");

  CLI11_PARSE(app, argc, argv);
  log::set_level(verbose ? log::Level::kInfo : log::Level::kWarning);
  torch::manual_seed(seed);

  try {
    if (*train) {
      auto cfg = train::TrainConfig::load(train_config);
      if (!resume.empty()) cfg.init_checkpoint = resume;
      if (train_seed) cfg.seed = *train_seed;
      log::set_level(log::Level::kInfo);
      train::run_stage(cfg);
      std::cout << "wrote " << cfg.output_checkpoint << "\n";
    } else if (*encode) {
      auto ckpt = load_checkpoint(enc_model);
      Pipeline pipeline(*ckpt.model);
      const QIndex q = checked_q(enc_q, *ckpt.model);
      auto image = data::read_image(enc_input);
      std::optional<tokens::TokenGrid> grid;
      if (!enc_tokens.empty()) {
        grid = tokens::read_token_file(enc_tokens);
      } else if (!enc_extractor.empty() && enc_extractor != ckpt.model->config().extractor.name) {
        throw ConfigError("model was trained with the '" + ckpt.model->config().extractor.name +
                          "' extractor, not '" + enc_extractor + "'");
      }
      if (grid && grid->dim() != ckpt.model->config().preedit.token_dim) {
        throw ConfigError("token dimension " + std::to_string(grid->dim()) + " does not match the model (" +
                          std::to_string(ckpt.model->config().preedit.token_dim) + ")");
      }
      auto encoded = pipeline.encode(image, q, !no_preedit, grid);
      const auto bytes = encoded.bitstream.serialize();
      write_file_atomic(enc_output, bytes);
      const auto rate = eval::bpp(bytes);
      std::printf("%zu bytes, %.6f bpp\n", bytes.size(), rate.value());
    } else if (*decode) {
      auto ckpt = load_checkpoint(dec_model);
      Pipeline pipeline(*ckpt.model);
      const auto bytes = read_file(dec_input);
      auto decoded = pipeline.decode(codec::Bitstream::parse(bytes));
      data::write_image(dec_output, decoded.image);
      std::printf("%lldx%lld q=%d\n", static_cast<long long>(decoded.image.size(2)),
                  static_cast<long long>(decoded.image.size(1)), decoded.q.value);
    } else if (*tok) {
      auto extractor = tokens::make_extractor(tok_spec);
      auto image = data::read_image(tok_input);
      auto padded = codec::pad_to_multiple(image, extractor->patch_size()).unsqueeze(0);
      torch::NoGradGuard no_grad;
      tokens::TokenGrid grid(tokens::extract_square(*extractor, padded).squeeze(0));
      tokens::write_token_file(tok_output, grid);
      std::printf("%lld x %lld tokens\n", static_cast<long long>(grid.dim()),
                  static_cast<long long>(grid.num()));
    } else if (*curve) {
      auto metric = eval::metric_by_name(cur_metric);
      auto ckpt = load_checkpoint(cur_model);
      Pipeline pipeline(*ckpt.model);
      std::vector<torch::Tensor> images;
      for (const auto& f : image_files(cur_dir)) {
        try {
          images.push_back(data::read_image(f));
        } catch (const Error& e) {
          log::warn(std::string("skipping ") + f.string() + ": " + e.what());
        }
      }
      if (images.empty()) throw IoError("no readable images in " + cur_dir);
      auto points = eval::sweep_curve(images, ckpt.model->config().codec.q_levels,
                                      eval::pipeline_round_trip(pipeline, !cur_no_preedit), metric);
      eval::write_curve_csv(cur_out, points);
      if (!cur_svg.empty()) eval::write_curve_svg(cur_svg, {{fs::path(cur_model).stem().string(), points}}, cur_metric);
      for (const auto& p : points) std::printf("q=%d bpp=%.6f %s=%.4f n=%lld\n", p.q, p.bpp, cur_metric.c_str(),
                                               p.metric, static_cast<long long>(p.n_images));
    } else if (*bd) {
      const double r = eval::bd_rate(eval::to_ra_points(eval::read_curve_csv(bd_anchor)),
                                     eval::to_ra_points(eval::read_curve_csv(bd_test)));
      std::printf("%.2f%%\n", r + 0.0);  // + 0.0 turns -0.00 into 0.00
    } else if (*cx) {
      std::unique_ptr<Model> model;
      if (!cx_model.empty()) {
        model = std::move(load_checkpoint(cx_model).model);
      } else {
        model = std::make_unique<Model>(cx_config == "full" ? ModelConfig::full() : ModelConfig::tiny());
      }
      std::cout << eval::format_complexity(eval::complexity_report(*model, cx_probe, cx_runs));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lvcc: %s\n", e.what());
    return 1;
  }
  return 0;
}
