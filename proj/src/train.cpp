#include "segrefine/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>

#include "segrefine/checkpoint.hpp"
#include "segrefine/errors.hpp"
#include "segrefine/losses.hpp"
#include "segrefine/perturb.hpp"

namespace segrefine {

namespace {

constexpr std::uint64_t kDatasetStream = 0xDA7A5E7ull;
constexpr std::uint64_t kBatchStream = 0xBA7C0000ull;

std::filesystem::path checkpoint_name(const std::filesystem::path& dir, int iteration) {
  return dir / ("checkpoint_" + std::to_string(iteration) + ".srck");
}

}  // namespace

AdamOptimizer::AdamOptimizer(RefinerModel& model, const TrainSchedule& schedule)
    : beta1_(schedule.beta1),
      beta2_(schedule.beta2),
      eps_(schedule.eps),
      weight_decay_(schedule.weight_decay) {
  for (const auto& p : model.net()->named_parameters()) {
    names_.push_back(p.key());
    params_.push_back(p.value());
    m_.push_back(torch::zeros_like(p.value()));
    v_.push_back(torch::zeros_like(p.value()));
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void AdamOptimizer::step(double lr) {
  torch::NoGradGuard guard;
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.grad().defined()) continue;
    auto g = p.grad();
    if (weight_decay_ != 0.0) g = g + weight_decay_ * p;
    m_[i].mul_(beta1_).add_(g, 1.0 - beta1_);
    v_[i].mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    const auto denom = (v_[i] / c2).sqrt_().add_(eps_);
    p.addcdiv_(m_[i], denom, -lr / c1);
  }
}

std::map<std::string, torch::Tensor> AdamOptimizer::state() const {
  std::map<std::string, torch::Tensor> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out["optim/" + names_[i] + "/m"] = m_[i];
    out["optim/" + names_[i] + "/v"] = v_[i];
  }
  return out;
}

void AdamOptimizer::load_state(const std::map<std::string, torch::Tensor>& arrays, std::int64_t steps) {
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const auto m = arrays.find("optim/" + names_[i] + "/m");
    const auto v = arrays.find("optim/" + names_[i] + "/v");
    if (m == arrays.end() || v == arrays.end()) {
      throw std::invalid_argument("optimizer state missing for " + names_[i]);
    }
    if (m->second.sizes() != m_[i].sizes() || v->second.sizes() != v_[i].sizes()) {
      throw std::invalid_argument("optimizer state shape mismatch for " + names_[i]);
    }
    m_[i].copy_(m->second);
    v_[i].copy_(v->second);
  }
  steps_ = steps;
}

DatasetSpec resolve_dataset(const RunConfig& config) {
  const std::string prefix = "synthetic:";
  if (config.dataset.rfind(prefix, 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(config.dataset.substr(prefix.size()));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad synthetic dataset spec: " + config.dataset);
    }
    if (n < 1) throw std::invalid_argument("synthetic dataset needs at least one item");
    auto rng = split_rng(config.seed, kDatasetStream);
    return synth_shape_dataset(n, config.synthetic_size, rng);
  }
  return open_directory_dataset(config.dataset);
}

std::vector<TrainingSample> sample_batch(const DatasetSpec& spec, const RunConfig& config, int iteration) {
  std::vector<TrainingSample> batch;
  const int b = config.schedule.batch_size;
  batch.reserve(static_cast<std::size_t>(b));
  for (int j = 0; j < b; ++j) {
    auto rng = split_rng(config.seed, kBatchStream + static_cast<std::uint64_t>(iteration) * 64 + j);
    batch.push_back(sample_training_example(spec, config.perturb, rng, config.schedule.crop_size));
  }
  return batch;
}

torch::Tensor batch_loss(RefinerModel& model, const std::vector<TrainingSample>& batch,
                         const LossWeights& weights) {
  std::vector<torch::Tensor> images, inits, gts;
  for (const auto& s : batch) {
    images.push_back(to_tensor(s.image));
    inits.push_back(to_tensor(s.perturbed));
    gts.push_back(to_tensor(s.gt));
  }
  const auto image = torch::cat(images, 0);
  const auto init = torch::cat(inits, 0);
  const auto gt = torch::cat(gts, 0);
  const auto out = cascade_forward(model.net(), image, init, init, CascadeKind::Global);
  return tensor::total_loss(out.levels, gt, weights).total;
}

TrainResult train_loop(const RunConfig& config, const TrainOptions& options) {
  config.schedule.validate();
  config.perturb.validate();
  const auto spec = resolve_dataset(config);
  if (spec.count() == 0) throw std::invalid_argument("training dataset is empty");

  std::optional<RefinerModel> model;
  int start = 0;
  std::map<std::string, torch::Tensor> optim_arrays;
  std::int64_t optim_steps = 0;
  if (!config.resume.empty()) {
    auto loaded = load_checkpoint(config.resume);
    if (loaded.meta.seed != config.seed) {
      throw std::invalid_argument("resume seed " + std::to_string(loaded.meta.seed) +
                                  " differs from run seed " + std::to_string(config.seed));
    }
    start = static_cast<int>(loaded.meta.iteration);
    optim_steps = loaded.meta.extra.value("optim_steps", std::int64_t{0});
    optim_arrays = std::move(loaded.extra_arrays);
    model.emplace(std::move(loaded.model));
  } else {
    model.emplace(build_refiner(config.refiner, config.seed));
  }
  AdamOptimizer optim(*model, config.schedule);
  if (!config.resume.empty()) optim.load_state(optim_arrays, optim_steps);

  const int total = config.schedule.total_iterations();
  const int stop = options.stop_after > 0 ? std::min(total, options.stop_after) : total;

  std::ofstream log;
  if (options.write_files) {
    std::filesystem::create_directories(config.out_dir);
    log.open(config.out_dir / "train_log.txt", start > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write training log in " + config.out_dir.string());
    log << std::setprecision(10);
  }

  auto save = [&](const std::filesystem::path& path, int completed) {
    CheckpointMeta meta{model->config(), completed, config.seed, {{"optim_steps", optim.steps()}}};
    save_checkpoint(path, *model, meta, optim.state());
  };

  TrainResult result;
  result.first_iteration = start;
  model->train();
  for (int it = start; it < stop; ++it) {
    const auto batch = sample_batch(spec, config, it);
    optim.zero_grad();
    auto loss = batch_loss(*model, batch, config.loss);
    if (options.loss_filter) loss = options.loss_filter(it, loss);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) throw NonFiniteLossError(it);
    loss.backward();
    const double lr = config.schedule.learning_rate(it);
    optim.step(lr);
    result.losses.push_back(value);

    const int completed = it + 1;
    if (options.on_iteration) options.on_iteration({completed, value, lr});
    if (options.write_files) {
      if (completed % config.schedule.log_every == 0 || completed == 1) {
        log << "event=iter iter=" << completed << " loss=" << value << " lr=" << lr << '\n';
        log.flush();
      }
      if (completed % config.schedule.checkpoint_every == 0) save(checkpoint_name(config.out_dir, completed), completed);
    }
  }
  result.completed = std::max(start, stop);
  model->eval();
  if (options.write_files) {
    result.final_checkpoint = config.out_dir / "final.srck";
    save(result.final_checkpoint, result.completed);
  }
  return result;
}

}  // namespace segrefine
