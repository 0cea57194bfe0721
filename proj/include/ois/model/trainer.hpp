#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ois/model/checkpoint.hpp"
#include "ois/model/config.hpp"
#include "ois/model/model.hpp"
#include "ois/scenegen/scene.hpp"

namespace ois {

// Adam with global-norm gradient clipping. Moments follow the model's
// parameter visiting order.
class Adam {
 public:
  Adam(const TrainConfig& config, OisModel<float>& model);

  // Applies one update from the accumulated gradients (already averaged).
  // Returns the pre-clipping gradient norm.
  double Step(OisModel<float>& model);

  std::int64_t steps() const { return t_; }
  std::vector<NamedTensor> Export(OisModel<float>& model) const;
  // Throws ConfigError when the moment tensors do not match the model.
  void Import(OisModel<float>& model, const std::vector<NamedTensor>& state,
              std::int64_t steps);

 private:
  TrainConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

// One (scene, instance) training target.
struct TrainTarget {
  int scene = 0;
  int instance = 0;
};

// Instances whose visible area reaches `min_area`, in scene order.
std::vector<TrainTarget> CollectTargets(const std::vector<Scene>& scenes,
                                        int min_area);

struct StepReport {
  std::int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

using StepCallback = std::function<void(const StepReport&)>;

// Multi-round simulated-click training. An epoch visits every scene once
// with one randomly chosen eligible instance. Each episode runs 0-2 untrained
// warm-up rounds (sampled clicks, predictions fed back as previous masks)
// followed by one trained round. Every epoch draws from its own rng seeded by
// (seed, epoch), so resuming from an epoch boundary reproduces an
// uninterrupted run exactly.
class Trainer {
 public:
  Trainer(OisModel<float>& model, const TrainConfig& config, std::uint64_t seed);

  // Restores step count, epoch count, loss history and Adam moments.
  void Resume(const Checkpoint& ckpt);

  // Runs epochs until `config.epochs` have completed. Throws TrainingError
  // on a non-finite loss or gradient, DataError when no usable target exists.
  void Run(const std::vector<Scene>& scenes, const StepCallback& on_step = {});

  // Trains exactly one batch taken from the start of the dataset.
  StepReport TrainOneStep(const std::vector<Scene>& scenes);

  Checkpoint MakeCheckpoint() const;

  std::int64_t step() const { return step_; }
  int epochs_done() const { return epochs_done_; }
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }

 private:
  // Wraps numeric failures as TrainingError.
  double RunEpisode(const Scene& scene, int instance, std::mt19937_64& rng);
  double RunEpisodeUnchecked(const Scene& scene, int instance,
                             std::mt19937_64& rng);
  StepReport ApplyBatch(double loss_sum, std::size_t count);

  OisModel<float>& model_;
  TrainConfig config_;
  std::uint64_t seed_;
  Adam adam_;
  std::int64_t step_ = 0;
  int epochs_done_ = 0;
  std::vector<double> epoch_losses_;
};

}  // namespace ois
