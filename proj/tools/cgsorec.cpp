// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgsorec/commands.hpp"
#include "cgsorec/error.hpp"
#include "cgsorec/synthetic.hpp"

namespace {

using namespace cgsorec;

std::vector<std::string> split_values(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Social-guided diffusion recommendation with popularity-bias mitigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--set", overrides, "override a config field: dotted.key=value");
  };

  auto* prepare = app.add_subcommand("prepare", "split the corpus and write the split manifest");
  add_common(prepare);

  std::string model = "cgd";
  std::string ckpt_dir;
  bool resume = false;
  auto* train = app.add_subcommand("train", "train the item (cgd) or social (csd) denoiser");
  add_common(train);
  train->add_option("--model", model, "cgd or csd")->check(CLI::IsMember({"cgd", "csd"}));
  train->add_option("--ckpt-dir", ckpt_dir, "checkpoint directory");
  train->add_flag("--resume", resume, "continue from the checkpoint in --ckpt-dir");

  std::string cgd_dir, csd_dir, out_path;
  bool unconditional = false;
  auto* infer = app.add_subcommand("infer", "run joint inference and write top-K lists");
  add_common(infer);
  infer->add_option("--cgd-ckpt", cgd_dir, "item model checkpoint directory");
  infer->add_option("--csd-ckpt", csd_dir, "social model checkpoint directory");
  infer->add_option("-o,--out", out_path, "output lists file")->required();
  infer->add_flag("--unconditional", unconditional, "plain diffusion recommendation, no social input");

  std::string lists_path;
  auto* eval = app.add_subcommand("eval", "evaluate a lists file");
  add_common(eval);
  eval->add_option("--lists", lists_path, "lists file from infer")->required();
  eval->add_option("-o,--out", out_path, "report prefix (writes .json and .freq.tsv)")->required();

  std::string param, values;
  auto* sweep = app.add_subcommand("sweep", "sweep one guidance parameter");
  add_common(sweep);
  sweep->add_option("--param", param, "parameter, e.g. w_r or guidance.lambda")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--cgd-ckpt", cgd_dir, "item model checkpoint directory");
  sweep->add_option("--csd-ckpt", csd_dir, "social model checkpoint directory");
  sweep->add_option("-o,--out-dir", out_path, "output directory")->required();

  std::vector<std::string> bias_lists;
  auto* bias = app.add_subcommand("bias-report", "per-popularity-bucket recommendation frequencies");
  add_common(bias);
  bias->add_option("--lists", bias_lists, "one or more lists files")->required();
  bias->add_option("-o,--out", out_path, "output TSV")->required();

  SyntheticSpec synth_spec;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "write a planted popularity-bias corpus");
  synth->add_option("-o,--out-dir", out_path, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--users", synth_spec.n_users);
  synth->add_option("--items", synth_spec.n_items);
  synth->add_option("--communities", synth_spec.n_communities);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      write_synthetic(out_path, synth_spec, synth_seed);
      return 0;
    }
    const auto cfg = load_config(config_path, overrides);
    auto ckpt = [&](const std::string& given, ModelTag tag) {
      return given.empty() ? default_ckpt_dir(cfg, tag) : fs::path(given);
    };
    if (prepare->parsed()) {
      cmd_prepare(cfg, std::cout);
    } else if (train->parsed()) {
      const auto tag = model_tag_from_string(model);
      cmd_train(cfg, tag, ckpt(ckpt_dir, tag), resume, std::cout);
    } else if (infer->parsed()) {
      cmd_infer(cfg, ckpt(cgd_dir, ModelTag::kCgd), ckpt(csd_dir, ModelTag::kCsd), out_path,
                unconditional, std::cout);
    } else if (eval->parsed()) {
      cmd_eval(cfg, lists_path, out_path, std::cout);
    } else if (sweep->parsed()) {
      cmd_sweep(cfg, param, split_values(values), ckpt(cgd_dir, ModelTag::kCgd),
                ckpt(csd_dir, ModelTag::kCsd), out_path, std::cout);
    } else if (bias->parsed()) {
      std::vector<fs::path> paths(bias_lists.begin(), bias_lists.end());
      cmd_bias_report(cfg, paths, out_path, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
