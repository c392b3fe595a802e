#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "segrefine/config.hpp"
#include "segrefine/dataset.hpp"
#include "segrefine/network.hpp"

namespace segrefine {

/// Adam with L2 weight decay folded into the gradient. Moments are plain
/// tensors so they can be stored alongside the model in a checkpoint.
class AdamOptimizer {
 public:
  AdamOptimizer(RefinerModel& model, const TrainSchedule& schedule);

  void zero_grad();
  void step(double lr);
  std::int64_t steps() const { return steps_; }

  /// "optim/<param>/m" and "optim/<param>/v" arrays.
  std::map<std::string, torch::Tensor> state() const;
  void load_state(const std::map<std::string, torch::Tensor>& arrays, std::int64_t steps);

 private:
  std::vector<std::string> names_;
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
  std::int64_t steps_ = 0;
};

/// Non-finite loss during training; carries the failing iteration.
class NonFiniteLossError : public std::runtime_error {
 public:
  explicit NonFiniteLossError(int iteration)
      : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// "synthetic:<n>" renders n scenes from the run seed; anything else is a directory.
DatasetSpec resolve_dataset(const RunConfig& config);

/// Batch of training samples for one iteration. The batch depends only on
/// (seed, iteration), so a resumed run sees the same data as a straight run.
std::vector<TrainingSample> sample_batch(const DatasetSpec& spec, const RunConfig& config, int iteration);

struct TrainEvent {
  int iteration = 0;  // 1-based count of completed iterations
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  /// Stop after this many completed iterations (0 = the full schedule).
  int stop_after = 0;
  /// Write checkpoints and the loss log under config.out_dir.
  bool write_files = true;
  std::function<void(const TrainEvent&)> on_iteration;
  /// Test hook applied to the loss before the finiteness check.
  std::function<torch::Tensor(int iteration, const torch::Tensor& loss)> loss_filter;
};

struct TrainResult {
  std::vector<double> losses;  // one per iteration run in this call
  int first_iteration = 0;     // 0-based index of losses[0]
  int completed = 0;
  std::filesystem::path final_checkpoint;
};

/// Runs (or resumes, when config.resume is set) the training schedule.
/// Checkpoints go to out_dir/checkpoint_<iter>.srck every checkpoint_every
/// iterations and to out_dir/final.srck at the end; losses to out_dir/train_log.txt.
TrainResult train_loop(const RunConfig& config, const TrainOptions& options = {});

/// One Global-cascade loss evaluation (no optimizer step); used for checks.
torch::Tensor batch_loss(RefinerModel& model, const std::vector<TrainingSample>& batch,
                         const LossWeights& weights);

}  // namespace segrefine
