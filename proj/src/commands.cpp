// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cgsorec/error.hpp"
#include "cgsorec/serialize.hpp"

namespace cgsorec {
namespace {

using nlohmann::json;

json pairs_json(const InteractionMatrix& m) {
  json arr = json::array();
  for (auto [u, i] : m.pairs()) arr.push_back({u, i});
  return arr;
}

InteractionMatrix pairs_from_json(const json& arr, int users, int items, const char* field) {
  std::vector<std::pair<int, int>> pairs;
  try {
    for (const auto& p : arr) pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  } catch (const json::exception&) {
    fail(ErrorKind::kIntegrity, std::string("split manifest: malformed '") + field + "'");
  }
  return InteractionMatrix::from_pairs(users, items, pairs);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path.string());
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

json metrics_json(const std::map<int, double>& m) {
  json j = json::object();
  for (auto [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

json bucket_json(const FrequencyBucket& b) {
  return {{"label", b.label},
          {"n_items", b.n_items},
          {"total", b.total},
          {"mean_frequency", b.mean_frequency}};
}

std::string freq_tsv(const FrequencyHistogram& h) {
  std::ostringstream out;
  out << "bucket\tn_items\ttotal\tmean_frequency\n";
  auto row = [&](const FrequencyBucket& b) {
    out << b.label << '\t' << b.n_items << '\t' << b.total << '\t'
        << format_double(b.mean_frequency) << '\n';
  };
  for (const auto& b : h.deciles) row(b);
  row(h.hot);
  row(h.tail);
  return out.str();
}

LoadOptions social_options(const ExperimentConfig& cfg, int n_users) {
  LoadOptions o;
  o.n_users = n_users;
  o.symmetrize = cfg.symmetrize;
  return o;
}

std::string sweep_key(const std::string& param) {
  return param.find('.') == std::string::npos ? "guidance." + param : param;
}

}  // namespace

json split_manifest(const SplitBundle& b) {
  return {{"seed", b.seed},
          {"ratios", {b.ratios.train, b.ratios.valid, b.ratios.test}},
          {"n_users", b.train.n_users()},
          {"n_items", b.train.n_items()},
          {"train", pairs_json(b.train)},
          {"valid", pairs_json(b.valid)},
          {"test", pairs_json(b.test)},
          {"debiased_test", pairs_json(b.debiased_test)}};
}

SplitBundle split_from_manifest(const json& m) {
  for (const char* key : {"seed", "ratios", "n_users", "n_items", "train", "valid", "test",
                          "debiased_test"})
    require(m.contains(key), ErrorKind::kIntegrity,
            std::string("split manifest: missing field '") + key + "'");
  SplitBundle b;
  try {
    b.seed = m.at("seed").get<std::uint64_t>();
    const auto r = m.at("ratios").get<std::vector<double>>();
    require(r.size() == 3, ErrorKind::kIntegrity, "split manifest: 'ratios' needs three values");
    b.ratios = {r[0], r[1], r[2]};
  } catch (const json::exception&) {
    fail(ErrorKind::kIntegrity, "split manifest: malformed header fields");
  }
  const int users = m.at("n_users").get<int>();
  const int items = m.at("n_items").get<int>();
  b.train = pairs_from_json(m.at("train"), users, items, "train");
  b.valid = pairs_from_json(m.at("valid"), users, items, "valid");
  b.test = pairs_from_json(m.at("test"), users, items, "test");
  b.debiased_test = pairs_from_json(m.at("debiased_test"), users, items, "debiased_test");
  return b;
}

PreparedData prepare_corpus(const InteractionMatrix& r, const SocialMatrix& s,
                            const ExperimentConfig& cfg) {
  require(s.n_users() == r.n_users(), ErrorKind::kDimension,
          "social matrix has " + std::to_string(s.n_users()) + " users, interactions have " +
              std::to_string(r.n_users()));
  PreparedData out;
  out.split = split(r, cfg.ratios, cfg.subsystem_seed("split"));
  out.split.debiased_test =
      build_debiased_test(out.split.test, cfg.debias_cap, cfg.subsystem_seed("debias"));
  out.social = s;
  out.groups = partition_items(out.split.train, cfg.hot_fraction);
  return out;
}

json corpus_stats(const InteractionMatrix& r, const SocialMatrix& s) {
  const double cells = static_cast<double>(r.n_users()) * r.n_items();
  return {{"users", r.n_users()},
          {"items", r.n_items()},
          {"interactions", r.nnz()},
          {"interaction_density", cells > 0 ? r.nnz() / cells : 0.0},
          {"social_entries", s.nnz()},
          {"connections_undirected", s.nnz() / 2}};
}

fs::path split_manifest_path(const ExperimentConfig& cfg) {
  return fs::path(cfg.output_dir) / "split.json";
}

fs::path default_ckpt_dir(const ExperimentConfig& cfg, ModelTag tag) {
  return fs::path(cfg.output_dir) / (tag == ModelTag::kCgd ? "ckpt_cgd" : "ckpt_csd");
}

PreparedData cmd_prepare(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate(/*check_files=*/true);
  LoadOptions opts;
  opts.n_users = cfg.n_users;
  opts.n_items = cfg.n_items;
  const auto r = load_interactions(cfg.interactions, opts);
  const auto s = load_social(cfg.social, social_options(cfg, r.n_users()));
  auto data = prepare_corpus(r, s, cfg);

  const json stats = corpus_stats(r, s);
  json full = stats;
  full["train"] = data.split.train.nnz();
  full["valid"] = data.split.valid.nnz();
  full["test"] = data.split.test.nnz();
  full["debiased_test"] = data.split.debiased_test.nnz();
  full["hot_items"] = data.groups.hot.size();
  write_text(split_manifest_path(cfg), split_manifest(data.split).dump() + "\n");
  write_text(fs::path(cfg.output_dir) / "stats.json", full.dump(2) + "\n");

  log << "users\t" << r.n_users() << "\nitems\t" << r.n_items() << "\ninteractions\t" << r.nnz()
      << "\nconnections\t" << s.nnz() / 2 << " (undirected), " << s.nnz() << " entries\n"
      << "density\t" << format_double(stats["interaction_density"].get<double>()) << "\n"
      << "train/valid/test\t" << data.split.train.nnz() << "/" << data.split.valid.nnz() << "/"
      << data.split.test.nnz() << "\ndebiased_test\t" << data.split.debiased_test.nnz()
      << "\nhot_items\t" << data.groups.hot.size() << "\n";
  return data;
}

PreparedData load_prepared(const ExperimentConfig& cfg) {
  const auto path = split_manifest_path(cfg);
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kData,
          "missing " + path.string() + "; run `prepare` first");
  const json manifest = json::parse(in, nullptr, /*allow_exceptions=*/false);
  require(!manifest.is_discarded(), ErrorKind::kIntegrity, path.string() + " is not valid JSON");
  PreparedData data;
  data.split = split_from_manifest(manifest);
  require(fs::exists(cfg.social), ErrorKind::kConfig, "data.social file not found: " + cfg.social);
  data.social = load_social(cfg.social, social_options(cfg, data.split.train.n_users()));
  data.groups = partition_items(data.split.train, cfg.hot_fraction);
  return data;
}

Checkpoint train_on(const PreparedData& data, const ExperimentConfig& cfg, ModelTag tag,
                    const Checkpoint* resume, std::ostream& log) {
  const bool item_model = tag == ModelTag::kCgd;
  const ModelConfig& mc = item_model ? cfg.cgd : cfg.csd;
  ModelSpec spec;
  spec.tag = tag;
  spec.hidden = mc.hidden;
  spec.time_embed_dim = mc.time_embed_dim;
  spec.init_seed = cfg.subsystem_seed(item_model ? "init/cgd" : "init/csd");
  TrainConfig tc = mc.train;
  tc.seed = cfg.subsystem_seed(item_model ? "train/cgd" : "train/csd");

  std::optional<Validation> validation;
  if (item_model) validation = Validation{&data.split.train, &data.split.valid};
  const SparseRows& rows = item_model ? data.split.train.sparse() : data.social.sparse();
  auto result = train_model(spec, rows, tc, mc.schedule.build(), validation, resume,
                            [&](int epoch, double loss, double metric) {
                              log << to_string(tag) << " epoch " << epoch << " loss "
                                  << format_double(loss) << " valid " << format_double(metric)
                                  << "\n";
                            });
  return result.best;
}

Checkpoint cmd_train(const ExperimentConfig& cfg, ModelTag tag, const fs::path& ckpt_dir,
                     bool resume, std::ostream& log) {
  cfg.validate(/*check_files=*/false);
  const auto data = load_prepared(cfg);
  std::optional<Checkpoint> previous;
  if (resume) previous = load_checkpoint(ckpt_dir);
  auto best = train_on(data, cfg, tag, previous ? &*previous : nullptr, log);
  save_checkpoint(best, ckpt_dir);
  log << "saved " << to_string(tag) << " checkpoint (epoch " << best.epoch << ") to "
      << ckpt_dir.string() << "\n";
  return best;
}

std::vector<RankedList> infer_lists(const PreparedData& data, const ExperimentConfig& cfg,
                                    const DiffusionModel<double>& cgd,
                                    const DiffusionModel<double>* csd, bool unconditional) {
  const auto& train = data.split.train;
  const int k = std::max(cfg.max_k(), 10);
  std::vector<int> users;
  const auto counts = train.user_counts();
  for (int u = 0; u < train.n_users(); ++u)
    if (train.n_items() - counts[u] >= k) users.push_back(u);

  const auto seed = cfg.subsystem_seed("infer");
  MatrixXd scores;
  if (unconditional) {
    scores = unconditional_inference(cgd, train, cfg.guidance.t_inf, cfg.guidance.stochastic,
                                     seed, users);
  } else {
    require(csd != nullptr, ErrorKind::kConfig, "joint inference needs the social model");
    JointInputs in{csd, &cgd, &data.social, &train, &data.groups};
    scores = joint_inference(in, cfg.guidance, seed, users);
  }
  return rank_all(scores, users, train, k);
}

void write_lists(const std::vector<RankedList>& lists, const fs::path& path) {
  std::ostringstream out;
  for (const auto& list : lists)
    for (std::size_t r = 0; r < list.items.size(); ++r)
      out << list.user << '\t' << list.items[r] << '\t' << format_double(list.scores[r]) << '\n';
  write_text(path, out.str());
}

std::vector<RankedList> read_lists(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  std::vector<RankedList> lists;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    int user = 0, item = 0;
    std::string score_text;
    if (!(fields >> user >> item >> score_text))
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) +
                                  ": expected user<TAB>item<TAB>score");
    double score = 0.0;
    std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (lists.empty() || lists.back().user != user) lists.push_back({user, {}, {}});
    lists.back().items.push_back(item);
    lists.back().scores.push_back(score);
  }
  return lists;
}

void cmd_infer(const ExperimentConfig& cfg, const fs::path& cgd_dir, const fs::path& csd_dir,
               const fs::path& out_path, bool unconditional, std::ostream& log) {
  cfg.validate(/*check_files=*/false);
  const auto data = load_prepared(cfg);
  const auto cgd = load_checkpoint(cgd_dir);
  std::optional<Checkpoint> csd;
  if (!unconditional) csd = load_checkpoint(csd_dir);
  const auto lists =
      infer_lists(data, cfg, cgd.model, csd ? &csd->model : nullptr, unconditional);
  write_lists(lists, out_path);
  log << "wrote top-" << (lists.empty() ? 0 : lists.front().items.size()) << " lists for "
      << lists.size() << " users to " << out_path.string() << "\n";
}

json report_json(const EvalReport& report, const ExperimentConfig& cfg) {
  auto group = [](const std::optional<GroupMetrics>& g) -> json {
    if (!g) return nullptr;
    return {{"recall", metrics_json(g->recall)}, {"ndcg", metrics_json(g->ndcg)}};
  };
  json deciles = json::array();
  for (const auto& b : report.freq.deciles) deciles.push_back(bucket_json(b));
  return {{"ks", report.ks},
          {"recall", metrics_json(report.recall)},
          {"ndcg", metrics_json(report.ndcg)},
          {"groups",
           {{"hot", group(report.groups.hot)},
            {"tail", group(report.groups.tail)},
            {"notices", report.groups.notices}}},
          {"frequency",
           {{"total", report.freq.total},
            {"deciles", deciles},
            {"hot", bucket_json(report.freq.hot)},
            {"tail", bucket_json(report.freq.tail)}}},
          {"config", to_json(cfg)}};
}

void write_report(const EvalReport& report, const ExperimentConfig& cfg,
                  const fs::path& json_path, const fs::path& freq_tsv_path) {
  write_text(json_path, report_json(report, cfg).dump(2) + "\n");
  write_text(freq_tsv_path, freq_tsv(report.freq));
}

EvalReport evaluate_lists(const std::vector<RankedList>& lists, const PreparedData& data,
                          const ExperimentConfig& cfg) {
  return evaluate(lists, data.split.train, data.eval_test(cfg), data.groups, cfg.ks,
                  cfg.per_user_recall ? RecallMode::kUserMean : RecallMode::kGlobalRatio);
}

EvalReport cmd_eval(const ExperimentConfig& cfg, const fs::path& lists_path,
                    const fs::path& report_prefix, std::ostream& log) {
  cfg.validate(/*check_files=*/false);
  const auto data = load_prepared(cfg);
  const auto report = evaluate_lists(read_lists(lists_path), data, cfg);
  write_report(report, cfg, fs::path(report_prefix.string() + ".json"),
               fs::path(report_prefix.string() + ".freq.tsv"));
  for (int k : report.ks)
    log << "Recall@" << k << "\t" << format_double(report.recall.at(k)) << "\tNDCG@" << k << "\t"
        << format_double(report.ndcg.at(k)) << "\n";
  for (const auto& n : report.groups.notices) log << "notice: " << n << "\n";
  return report;
}

void cmd_sweep(const ExperimentConfig& cfg, const std::string& param,
               const std::vector<std::string>& values, const fs::path& cgd_dir,
               const fs::path& csd_dir, const fs::path& out_dir, std::ostream& log) {
  require(!values.empty(), ErrorKind::kConfig, "sweep needs at least one value");
  cfg.validate(/*check_files=*/false);
  const auto data = load_prepared(cfg);
  const auto cgd = load_checkpoint(cgd_dir);
  const auto csd = load_checkpoint(csd_dir);
  const std::string key = sweep_key(param);

  std::ostringstream summary;
  summary << param << "\tRecall@5\tRecall@10\tNDCG@10\n";
  for (const auto& value : values) {
    json doc = to_json(cfg);
    apply_override(doc, key + "=" + value);
    const auto point = experiment_config_from_json(doc);
    const auto lists = infer_lists(data, point, cgd.model, &csd.model, false);
    const auto report = evaluate_lists(lists, data, point);
    const auto stem = out_dir / (param + "=" + value);
    write_report(report, point, fs::path(stem.string() + ".json"),
                 fs::path(stem.string() + ".freq.tsv"));
    const auto& test = data.eval_test(point);
    const auto mode = point.per_user_recall ? RecallMode::kUserMean : RecallMode::kGlobalRatio;
    const double r5 = recall_at_k(lists, test, 5, mode);
    const double r10 = recall_at_k(lists, test, 10, mode);
    const double n10 = ndcg_at_k(lists, test, 10);
    summary << value << '\t' << format_double(r5) << '\t' << format_double(r10) << '\t'
            << format_double(n10) << '\n';
    log << param << "=" << value << "\tRecall@10 " << format_double(r10) << "\tNDCG@10 "
        << format_double(n10) << "\n";
  }
  write_text(out_dir / "summary.tsv", summary.str());
}

void cmd_bias_report(const ExperimentConfig& cfg, const std::vector<fs::path>& lists_paths,
                     const fs::path& out_tsv, std::ostream& log) {
  require(!lists_paths.empty(), ErrorKind::kConfig, "bias-report needs at least one lists file");
  cfg.validate(/*check_files=*/false);
  const auto data = load_prepared(cfg);
  std::vector<FrequencyHistogram> hists;
  for (const auto& p : lists_paths)
    hists.push_back(frequency_histogram(read_lists(p), data.split.train, data.groups, cfg.max_k()));

  std::ostringstream out;
  out << "bucket\tn_items";
  for (const auto& p : lists_paths) out << '\t' << p.stem().string();
  out << '\n';
  auto rows = [&](auto pick) {
    const auto& first = pick(hists.front());
    out << first.label << '\t' << first.n_items;
    for (const auto& h : hists) out << '\t' << format_double(pick(h).mean_frequency);
    out << '\n';
  };
  for (std::size_t d = 0; d < hists.front().deciles.size(); ++d)
    rows([d](const FrequencyHistogram& h) -> const FrequencyBucket& { return h.deciles[d]; });
  rows([](const FrequencyHistogram& h) -> const FrequencyBucket& { return h.hot; });
  rows([](const FrequencyHistogram& h) -> const FrequencyBucket& { return h.tail; });
  write_text(out_tsv, out.str());
  log << "wrote " << out_tsv.string() << "\n";
}

}  // namespace cgsorec
