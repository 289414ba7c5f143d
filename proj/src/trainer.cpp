// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cgsorec/eval.hpp"
#include "cgsorec/parallel.hpp"
#include "cgsorec/serialize.hpp"

namespace cgsorec {
namespace {

// Gradient chunk width. Fixed so the reduction order never depends on the
// number of workers.
constexpr Eigen::Index kGradChunk = 32;
constexpr int kFormatVersion = 1;

MatrixXd dense_rows(const SparseRows& data, std::span<const int> rows) {
  MatrixXd out = MatrixXd::Zero(data.cols(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (SparseRows::InnerIterator it(data, rows[c]); it; ++it)
      out(it.col(), static_cast<Eigen::Index>(c)) = it.value();
  return out;
}

void add_scaled(DenoiserParams<double>& acc, const DenoiserParams<double>& g, double scale) {
  for (std::size_t l = 0; l < acc.n_layers(); ++l) {
    acc.weights[l] += scale * g.weights[l];
    acc.biases[l] += scale * g.biases[l];
  }
}

LossAndGrad<double> batch_gradient(const DenoiserParams<double>& params,
                                   const TrainingBatch<double>& batch, const NoiseSchedule& sched) {
  const Eigen::Index n = batch.size();
  const auto n_chunks = static_cast<std::size_t>((n + kGradChunk - 1) / kGradChunk);
  std::vector<LossAndGrad<double>> parts(n_chunks);
  parallel_for(n_chunks, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kGradChunk;
    const Eigen::Index len = std::min(kGradChunk, n - begin);
    TrainingBatch<double> chunk;
    chunk.x0 = batch.x0.middleCols(begin, len);
    chunk.eps = batch.eps.middleCols(begin, len);
    chunk.steps.assign(batch.steps.begin() + begin, batch.steps.begin() + begin + len);
    parts[c] = loss_and_grad(params, chunk, sched);
  });
  LossAndGrad<double> total{0.0, params.zeros_like()};
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kGradChunk;
    const double share = static_cast<double>(std::min(kGradChunk, n - begin)) / n;
    total.loss += share * parts[c].loss;
    add_scaled(total.grads, parts[c].grads, share);
  }
  return total;
}

double validation_recall(const DiffusionModel<double>& model, const Validation& v, int k,
                         std::uint64_t seed) {
  std::vector<int> users;
  for (int u = 0; u < v.valid->n_users(); ++u)
    if (v.valid->sparse().outerIndexPtr()[u + 1] > v.valid->sparse().outerIndexPtr()[u])
      users.push_back(u);
  if (users.empty()) return 0.0;
  const MatrixXd scores = unconditional_inference(model, *v.train, 0, false, seed, users);
  const auto lists = rank_all(scores, users, *v.train, k);
  return recall_at_k(lists, *v.valid, k);
}

// Little-endian f64 stream helpers.
void write_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double read_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_tensors(const DenoiserParams<double>& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  p.for_each_tensor([&](const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) write_f64(out, t[i]);
  });
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIntegrity, "missing checkpoint file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void read_tensors(DenoiserParams<double>& p, const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  const auto expected = static_cast<std::size_t>(p.parameter_count()) * 8;
  require(blob.size() == expected, ErrorKind::kIntegrity,
          path.filename().string() + ": size " + std::to_string(blob.size()) +
              " bytes does not match layer_dims (expected " + std::to_string(expected) + ")");
  std::size_t offset = 0;
  p.for_each_tensor([&](auto t) {
    for (Eigen::Index i = 0; i < t.size(); ++i, offset += 8) t[i] = read_f64(blob.data() + offset);
  });
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  // Zero is accepted here (a frozen run); experiment configs demand > 0.
  require(learning_rate >= 0.0, ErrorKind::kConfig, "learning_rate must be >= 0");
  require(epochs >= 0, ErrorKind::kConfig, "epochs must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig,
          "moment decay rates must lie in [0, 1)");
  require(epsilon > 0.0, ErrorKind::kConfig, "epsilon must be > 0");
  require(patience >= 1, ErrorKind::kConfig, "patience must be >= 1");
  require(valid_k >= 1, ErrorKind::kConfig, "valid_k must be >= 1");
}

void optimizer_step(DenoiserParams<double>& params, const DenoiserParams<double>& grads,
                    AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  };
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    update(params.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l]);
    update(params.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l]);
  }
}

TrainResult train_model(const ModelSpec& spec, const SparseRows& data, const TrainConfig& cfg,
                        const NoiseSchedule& sched, const std::optional<Validation>& validation,
                        const Checkpoint* resume,
                        const std::function<void(int, double, double)>& on_epoch) {
  cfg.validate();
  require(data.rows() >= 1, ErrorKind::kData, "no training rows");
  if (validation)
    require(validation->train && validation->valid &&
                validation->train->n_items() == data.cols() &&
                validation->valid->n_items() == data.cols(),
            ErrorKind::kShape, "validation matrices do not match the training rows");

  Checkpoint current;
  if (resume) {
    require(resume->model.params.width() == data.cols(), ErrorKind::kShape,
            "resumed checkpoint width differs from the data");
    current = *resume;
    current.config = cfg;
  } else {
    std::vector<int> dims{static_cast<int>(data.cols())};
    dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
    dims.push_back(static_cast<int>(data.cols()));
    current.model = {init_params<double>(dims, spec.time_embed_dim, spec.init_seed, spec.tag),
                     sched};
    current.config = cfg;
    current.optimizer = AdamState::zeros_like(current.model.params);
    current.init_seed = spec.init_seed;
    current.valid_metric = -std::numeric_limits<double>::infinity();
  }

  TrainResult result;
  result.best = current;
  int since_best = 0;
  const int steps = current.model.sched.steps();
  std::vector<int> order(static_cast<std::size_t>(data.rows()));

  for (int epoch = current.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(user_seed(cfg.seed, static_cast<std::uint64_t>(epoch), "epoch"));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    std::uniform_int_distribution<int> pick_step(1, steps);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                    order.size() - begin);
      const std::span<const int> rows(order.data() + begin, len);
      TrainingBatch<double> batch;
      batch.x0 = dense_rows(data, rows);
      batch.steps.resize(len);
      for (auto& t : batch.steps) t = pick_step(rng);
      batch.eps.resize(batch.x0.rows(), batch.x0.cols());
      fill_normal(batch.eps, rng);

      LossAndGrad<double> lg;
      try {
        lg = batch_gradient(current.model.params, batch, current.model.sched);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        fail(ErrorKind::kNumeric, std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(begin / cfg.batch_size));
      }
      optimizer_step(current.model.params, lg.grads, current.optimizer, cfg);
      require(current.model.params.all_finite(), ErrorKind::kNumeric,
              "non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                  std::to_string(begin / cfg.batch_size));
      loss_sum += lg.loss * static_cast<double>(len);
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    const double metric =
        validation ? validation_recall(current.model, *validation, cfg.valid_k,
                                       derive_seed(cfg.seed, "validation"))
                   : -epoch_loss;
    current.epoch = epoch;
    current.valid_metric = metric;
    result.epoch_losses.push_back(epoch_loss);
    result.valid_metrics.push_back(metric);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, epoch_loss, metric);

    if (metric > result.best.valid_metric) {
      result.best = current;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (result.epochs_run == 0) result.epochs_run = current.epoch;
  result.last = std::move(current);
  return result;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& p = ckpt.model.params;
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["model_tag"] = to_string(p.tag);
  manifest["layer_dims"] = p.layer_dims;
  manifest["time_embed_dim"] = p.time_embed_dim;
  manifest["schedule"] = to_json(ckpt.model.sched);
  manifest["seed"] = ckpt.init_seed;
  manifest["train_config"] = to_json(ckpt.config);
  manifest["epoch"] = ckpt.epoch;
  manifest["valid_metric"] = ckpt.valid_metric;
  manifest["optimizer_step"] = ckpt.optimizer.step;
  manifest["parameter_count"] = p.parameter_count();
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    tensors.push_back({{"name", "W" + std::to_string(l)},
                       {"shape", {p.weights[l].rows(), p.weights[l].cols()}}});
    tensors.push_back({{"name", "b" + std::to_string(l)}, {"shape", {p.biases[l].size()}}});
  }
  manifest["tensors"] = tensors;

  write_tensors(p, dir / "params.bin");
  write_tensors(ckpt.optimizer.m, dir / "optimizer_m.bin");
  write_tensors(ckpt.optimizer.v, dir / "optimizer_v.bin");
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIntegrity, "manifest.json: " + std::string(e.what()));
  }
  auto field = [&](const char* name) -> const nlohmann::json& {
    require(manifest.contains(name), ErrorKind::kIntegrity,
            std::string("manifest.json: missing field '") + name + "'");
    return manifest.at(name);
  };
  try {
    require(field("format_version").get<int>() == kFormatVersion, ErrorKind::kIntegrity,
            "manifest.json: unsupported format_version");
    Checkpoint ckpt;
    const auto dims = field("layer_dims").get<std::vector<int>>();
    const int embed = field("time_embed_dim").get<int>();
    ckpt.model.params =
        make_params<double>(dims, embed, model_tag_from_string(field("model_tag").get<std::string>()));
    require(field("parameter_count").get<Eigen::Index>() == ckpt.model.params.parameter_count(),
            ErrorKind::kIntegrity, "manifest.json: parameter_count disagrees with layer_dims");
    ckpt.model.sched = schedule_from_json(field("schedule"));
    ckpt.init_seed = field("seed").get<std::uint64_t>();
    ckpt.config = train_config_from_json(field("train_config"));
    ckpt.epoch = field("epoch").get<int>();
    ckpt.valid_metric = field("valid_metric").is_null()
                            ? -std::numeric_limits<double>::infinity()
                            : field("valid_metric").get<double>();
    read_tensors(ckpt.model.params, dir / "params.bin");
    ckpt.optimizer = AdamState::zeros_like(ckpt.model.params);
    ckpt.optimizer.step = field("optimizer_step").get<long>();
    read_tensors(ckpt.optimizer.m, dir / "optimizer_m.bin");
    read_tensors(ckpt.optimizer.v, dir / "optimizer_v.bin");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIntegrity, "manifest.json: " + std::string(e.what()));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIntegrity) throw;
    fail(ErrorKind::kIntegrity, std::string("checkpoint invalid: ") + e.what());
  }
}

}  // namespace cgsorec
