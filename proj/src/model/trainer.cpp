#include "ois/model/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "ois/model/loss.hpp"
#include "ois/simharness/click_sim.hpp"

namespace ois {

Adam::Adam(const TrainConfig& config, OisModel<float>& model) : config_(config) {
  model.VisitParameters([&](const std::string&, Parameter<float>& p) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  });
}

double Adam::Step(OisModel<float>& model) {
  double sq = 0.0;
  model.VisitParameters([&](const std::string& name, Parameter<float>& p) {
    for (float g : p.grad.values()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);
      sq += static_cast<double>(g) * g;
    }
  });
  const double norm = std::sqrt(sq);
  const double clip =
      config_.grad_clip > 0 && norm > config_.grad_clip ? config_.grad_clip / norm : 1.0;
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  std::size_t k = 0;
  model.VisitParameters([&](const std::string& name, Parameter<float>& p) {
    const bool is_sigma = name.ends_with("sigma_raw");
    const double step = is_sigma ? lr * config_.sigma_lr_scale : lr;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    ++k;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] * clip;
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p.value[i] -= static_cast<float>(
          step * (mi / c1) / (std::sqrt(vi / c2) + config_.adam_eps));
    }
  });
  return norm;
}

std::vector<NamedTensor> Adam::Export(OisModel<float>& model) const {
  std::vector<NamedTensor> out;
  std::size_t k = 0;
  model.VisitParameters([&](const std::string& name, Parameter<float>&) {
    out.push_back({"m/" + name, m_[k]});
    out.push_back({"v/" + name, v_[k]});
    ++k;
  });
  return out;
}

void Adam::Import(OisModel<float>& model, const std::vector<NamedTensor>& state,
                  std::int64_t steps) {
  std::size_t k = 0;
  model.VisitParameters([&](const std::string& name, Parameter<float>& p) {
    if (2 * k + 1 >= state.size()) throw ConfigError("optimizer state too short");
    const NamedTensor& m = state[2 * k];
    const NamedTensor& v = state[2 * k + 1];
    if (m.name != "m/" + name || v.name != "v/" + name ||
        m.value.shape() != p.value.shape() || v.value.shape() != p.value.shape()) {
      throw ConfigError("optimizer state does not match parameter " + name);
    }
    m_[k] = m.value;
    v_[k] = v.value;
    ++k;
  });
  if (2 * k != state.size()) throw ConfigError("optimizer state too long");
  t_ = steps;
}

std::vector<TrainTarget> CollectTargets(const std::vector<Scene>& scenes,
                                        int min_area) {
  std::vector<TrainTarget> out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (std::size_t i = 0; i < scenes[s].masks.size(); ++i) {
      if (static_cast<int>(scenes[s].masks[i].Count()) >= min_area) {
        out.push_back({static_cast<int>(s), static_cast<int>(i)});
      }
    }
  }
  return out;
}

Trainer::Trainer(OisModel<float>& model, const TrainConfig& config,
                 std::uint64_t seed)
    : model_(model), config_(config), seed_(seed), adam_(config, model) {
  if (config.epochs < 0 || config.batch_size < 1 || config.learning_rate <= 0 ||
      config.sigma_lr_scale <= 0) {
    throw ValidationError(
        "epochs >= 0, batch_size >= 1, learning_rate > 0, sigma_lr_scale > 0");
  }
}

void Trainer::Resume(const Checkpoint& ckpt) {
  if (!(ckpt.model == model_.config())) {
    throw ConfigError("checkpoint model config differs from the trainer's");
  }
  ImportWeights(model_, ckpt.weights);
  adam_.Import(model_, ckpt.optimizer, ckpt.step);
  step_ = ckpt.step;
  epochs_done_ = ckpt.epochs_done;
  epoch_losses_ = ckpt.epoch_losses;
  seed_ = ckpt.seed;
}

double Trainer::RunEpisode(const Scene& scene, int instance,
                            std::mt19937_64& rng) {
  try {
    return RunEpisodeUnchecked(scene, instance, rng);
  } catch (const TrainingError&) {
    throw;
  } catch (const NumericError& e) {
    throw TrainingError(step_, e.what());
  }
}

double Trainer::RunEpisodeUnchecked(const Scene& scene, int instance,
                                    std::mt19937_64& rng) {
  const BinaryMask& gt = scene.masks[instance];
  EncoderCache<float> enc_cache;
  const FeatureMap<float> features =
      model_.EncodeImage(scene.image, scene.depth, &enc_cache);

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double u = coin(rng);
  int extra = 2;
  if (u < config_.extra_round_probs[0]) {
    extra = 0;
  } else if (u < config_.extra_round_probs[0] + config_.extra_round_probs[1]) {
    extra = 1;
  }

  ClickSet clicks;
  std::optional<BinaryMask> previous;
  clicks.Add(*SampleTrainClick(gt, nullptr, 0, rng));
  for (int round = 1; round <= extra; ++round) {
    BinaryMask pred = model_.Predict(features, clicks, scene.depth,
                                     previous ? &*previous : nullptr);
    const std::optional<Click> next = SampleTrainClick(gt, &pred, round, rng);
    previous = std::move(pred);
    if (!next || !clicks.HasRoom(next->polarity)) break;
    clicks.Add(*next);
  }

  RoundCache<float> cache;
  const Tensor logits = model_.PredictLogits(
      features, clicks, scene.depth, previous ? &*previous : nullptr, &cache);
  LossResult<float> loss =
      NormalizedFocalLoss(logits, gt.ToTensor(), config_.loss);
  if (!std::isfinite(loss.value)) {
    throw TrainingError(step_, "non-finite loss");
  }
  const float inv_batch = 1.0f / static_cast<float>(config_.batch_size);
  for (float& g : loss.grad.values()) g *= inv_batch;
  const Tensor grad_features = model_.BackwardRound(cache, loss.grad);
  model_.BackwardEncoder(enc_cache, grad_features);
  return loss.value;
}

StepReport Trainer::ApplyBatch(double loss_sum, std::size_t count) {
  StepReport r;
  try {
    r.grad_norm = adam_.Step(model_);
  } catch (const NumericError& e) {
    throw TrainingError(step_, e.what());
  }
  ++step_;
  r.step = step_;
  r.epoch = epochs_done_;
  r.loss = loss_sum / static_cast<double>(count);
  model_.ZeroGrad();
  return r;
}

StepReport Trainer::TrainOneStep(const std::vector<Scene>& scenes) {
  const std::vector<TrainTarget> targets =
      CollectTargets(scenes, config_.min_instance_area);
  if (targets.empty()) throw DataError("no instance reaches the minimum area");
  std::mt19937_64 rng = SceneRng(seed_, 1 << 20);
  model_.ZeroGrad();
  double loss_sum = 0.0;
  const std::size_t n = std::min<std::size_t>(config_.batch_size, targets.size());
  for (std::size_t i = 0; i < n; ++i) {
    loss_sum += RunEpisode(scenes[targets[i].scene], targets[i].instance, rng);
  }
  return ApplyBatch(loss_sum, n);
}

void Trainer::Run(const std::vector<Scene>& scenes, const StepCallback& on_step) {
  const std::vector<TrainTarget> targets =
      CollectTargets(scenes, config_.min_instance_area);
  if (targets.empty()) throw DataError("no instance reaches the minimum area");
  // Eligible instances grouped by scene; each epoch visits every scene once
  // with one of its instances.
  std::vector<std::vector<int>> by_scene(scenes.size());
  for (const TrainTarget& t : targets) by_scene[t.scene].push_back(t.instance);
  model_.ZeroGrad();
  while (epochs_done_ < config_.epochs) {
    std::mt19937_64 rng = SceneRng(seed_, epochs_done_);
    std::vector<TrainTarget> order;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      if (by_scene[s].empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, by_scene[s].size() - 1);
      order.push_back({static_cast<int>(s), by_scene[s][pick(rng)]});
    }
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    double batch_sum = 0.0;
    std::size_t in_batch = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const double loss =
          RunEpisode(scenes[order[i].scene], order[i].instance, rng);
      batch_sum += loss;
      epoch_sum += loss;
      ++in_batch;
      const bool last = i + 1 == order.size();
      if (in_batch == static_cast<std::size_t>(config_.batch_size) || last) {
        if (in_batch < static_cast<std::size_t>(config_.batch_size)) {
          // Gradients were scaled by 1/batch_size; rescale the short batch.
          const float fix = static_cast<float>(config_.batch_size) /
                            static_cast<float>(in_batch);
          model_.VisitParameters([&](const std::string&, Parameter<float>& p) {
            for (float& g : p.grad.values()) g *= fix;
          });
        }
        const StepReport r = ApplyBatch(batch_sum, in_batch);
        if (on_step) on_step(r);
        batch_sum = 0.0;
        in_batch = 0;
      }
    }
    epoch_losses_.push_back(epoch_sum / static_cast<double>(order.size()));
    ++epochs_done_;
  }
}

Checkpoint Trainer::MakeCheckpoint() const {
  Checkpoint c;
  c.model = model_.config();
  c.train = config_;
  c.seed = seed_;
  c.step = step_;
  c.epochs_done = epochs_done_;
  c.epoch_losses = epoch_losses_;
  c.weights = ExportWeights(model_);
  c.optimizer = adam_.Export(model_);
  return c;
}

}  // namespace ois
