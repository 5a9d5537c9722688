/*
 * Copyright (c) 2026 The OWAN Lab Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// owan: synthesize datasets, train, restore, evaluate and analyze.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "owan/analysis.hpp"
#include "owan/dataset.hpp"
#include "owan/metrics.hpp"
#include "owan/restore.hpp"
#include "owan/text_util.hpp"
#include "owan/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct SynthArgs {
  std::string protocol = "mixed";
  std::string in, out;
  std::size_t count = 1;
  std::size_t patch_size = 64;
  std::uint64_t seed = 0;
  std::string severity = "moderate";
};

struct TrainArgs {
  std::string config, resume;
};

struct RestoreArgs {
  std::string ckpt, in, out, attention_csv;
  std::size_t max_tile = 256, overlap = 32;
};

struct EvalArgs {
  std::string restored, reference, report;
};

struct AnalyzeArgs {
  std::string ckpt, out, diff_out;
  std::vector<std::string> data, tags;
  std::size_t max_tile = 256, overlap = 32;
};

void print_settings(const std::string& command, const std::vector<std::pair<std::string, std::string>>& entries) {
  std::cout << "# owan " << command << "\n" << owan::format_key_values(entries) << std::flush;
}

int run_synth(const SynthArgs& a) {
  owan::synth::DatasetOptions o;
  o.protocol = owan::synth::parse_protocol(a.protocol);
  o.patches_per_image = a.count;
  o.patch_size = a.patch_size;
  o.master_seed = a.seed;
  o.severity = owan::synth::parse_severity(a.severity);
  print_settings("synth", {{"protocol", owan::synth::to_string(o.protocol)},
                           {"in", a.in},
                           {"out", a.out},
                           {"count", std::to_string(a.count)},
                           {"patch_size", std::to_string(a.patch_size)},
                           {"seed", std::to_string(a.seed)},
                           {"severity", owan::synth::to_string(o.severity)}});
  const auto rows = owan::synth::build_dataset(a.in, a.out, o, std::cerr);
  std::cout << "wrote " << rows.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

int run_train(const TrainArgs& a) {
  const auto cfg = owan::train::load_train_config(a.config);
  auto entries = owan::train::train_config_entries(cfg);
  if (!a.resume.empty()) entries.emplace_back("resume", a.resume);
  print_settings("train", entries);
  if (cfg.output_dir.empty()) throw owan::ConfigError("output_dir must be set for command-line training");
  std::optional<owan::Checkpoint> resume;
  if (!a.resume.empty()) resume = owan::load_checkpoint(a.resume);
  const auto result = owan::train::train(cfg, std::cerr, resume ? &*resume : nullptr);
  if (!result.log.empty()) {
    std::cout << "final step " << result.log.back().step << " loss " << result.log.back().loss << "\n";
  }
  std::cout << "checkpoint " << (cfg.output_dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

int run_restore(const RestoreArgs& a) {
  print_settings("restore", {{"ckpt", a.ckpt},
                             {"in", a.in},
                             {"out", a.out},
                             {"attention_csv", a.attention_csv},
                             {"max_tile", std::to_string(a.max_tile)},
                             {"overlap", std::to_string(a.overlap)}});
  const auto ckpt = owan::load_checkpoint(a.ckpt);
  const auto params = owan::params_from_checkpoint<float>(ckpt);
  const auto summary = owan::restore_images(params, a.in, a.out, std::cerr, {a.max_tile, a.overlap});
  if (!a.attention_csv.empty()) owan::write_attention_csv(a.attention_csv, summary.records, params.config.ops);
  std::cout << "restored " << summary.written << " images, skipped " << summary.skipped << "\n";
  return kExitOk;
}

int run_eval(const EvalArgs& a) {
  print_settings("eval", {{"restored", a.restored}, {"reference", a.reference}, {"report", a.report}});
  const auto report = owan::metrics::evaluate_pairs(a.restored, a.reference);
  owan::metrics::write_report_csv(a.report, report);
  std::cout << "pairs " << report.count << " mean_psnr " << owan::format_real(report.mean_psnr) << " mean_ssim "
            << owan::format_real(report.mean_ssim) << "\n";
  return kExitOk;
}

int run_analyze(const AnalyzeArgs& a) {
  if (a.data.size() != a.tags.size()) throw owan::ConfigError("--data and --tag must be given the same number of times");
  std::vector<std::pair<std::string, std::string>> entries = {{"ckpt", a.ckpt}, {"out", a.out}, {"diff_out", a.diff_out}};
  for (std::size_t i = 0; i < a.data.size(); ++i) entries.emplace_back("data." + a.tags[i], a.data[i]);
  print_settings("analyze", entries);
  const auto ckpt = owan::load_checkpoint(a.ckpt);
  const auto params = owan::params_from_checkpoint<float>(ckpt);
  if (params.config.attention_mode == owan::AttentionMode::none) {
    throw owan::ConfigError("the checkpoint uses attention_mode=none; there are no attention weights to analyze");
  }
  std::vector<owan::analysis::AttentionStats> all;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const auto records = owan::analysis::collect_attention(params, a.data[i], {a.max_tile, a.overlap});
    all.push_back(owan::analysis::stats(records, a.tags[i]));
  }
  owan::analysis::export_stats_csv(all, a.out);
  if (!a.diff_out.empty()) owan::analysis::export_diff_csv(owan::analysis::diff_maps(all), a.diff_out);
  std::cout << "analyzed " << all.size() << " tag(s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operation-wise attention network: dataset synthesis, training, restoration and analysis"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Crop clean patches and synthesize distorted counterparts");
  synth->add_option("--protocol", sa.protocol, "div2k, mixed, novel-train, novel-test or external")
      ->check(CLI::IsMember({"div2k", "mixed", "novel-train", "novel-test", "external"}))
      ->capture_default_str();
  synth->add_option("--in", sa.in, "Directory of clean PNG images (external: holds clean/ and distorted/)")
      ->required();
  synth->add_option("--out", sa.out, "Output dataset directory")->required();
  synth->add_option("--count", sa.count, "Patches per source image")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--patch-size", sa.patch_size, "Patch side length in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  synth->add_option("--severity", sa.severity, "div2k severity class: mild, moderate or severe")
      ->check(CLI::IsMember({"mild", "moderate", "severe"}))
      ->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a network from a key = value config file");
  train->add_option("--config", ta.config, "Training config file")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", ta.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

  RestoreArgs ra;
  auto* restore = app.add_subcommand("restore", "Restore every PNG in a directory");
  restore->add_option("--ckpt", ra.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  restore->add_option("--in", ra.in, "Directory of distorted PNG images")->required()->check(CLI::ExistingDirectory);
  restore->add_option("--out", ra.out, "Output directory")->required();
  restore->add_option("--attention-csv", ra.attention_csv, "Also write per-image attention weights here");
  restore->add_option("--max-tile", ra.max_tile, "Largest side processed in one pass")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  restore->add_option("--overlap", ra.overlap, "Overlap between neighbouring tiles")->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of restored images against references");
  eval->add_option("--restored", ea.restored, "Directory of restored images")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--reference", ea.reference, "Directory of reference images")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--report", ea.report, "Output CSV report")->required();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Attention-weight statistics per layer and operation");
  analyze->add_option("--ckpt", aa.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--data", aa.data, "Dataset or image directory (repeat once per tag)")
      ->required()
      ->check(CLI::ExistingDirectory);
  analyze->add_option("--tag", aa.tags, "Distortion tag naming the matching --data")->required();
  analyze->add_option("--out", aa.out, "Output CSV of mean/variance per (tag, layer, op)")->required();
  analyze->add_option("--diff-out", aa.diff_out, "Output CSV of difference maps against the pooled mean");
  analyze->add_option("--max-tile", aa.max_tile, "Largest side processed in one pass")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  analyze->add_option("--overlap", aa.overlap, "Overlap between neighbouring tiles")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*train) return run_train(ta);
    if (*restore) return run_restore(ra);
    if (*eval) return run_eval(ea);
    if (*analyze) return run_analyze(aa);
  } catch (const owan::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
