#include "mmt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <thread>

#include "mmt/error.hpp"
#include "mmt/optim.hpp"
#include "mmt/rng.hpp"

namespace mmt {

const char* incomplete_handling_name(IncompleteHandling h) { return h == IncompleteHandling::Mmt ? "mmt" : "filter"; }

IncompleteHandling parse_incomplete_handling(const std::string& s) {
  if (s == "mmt") return IncompleteHandling::Mmt;
  if (s == "filter") return IncompleteHandling::Filter;
  throw ConfigError("unknown incomplete handling '" + s + "' (expected mmt or filter)");
}

void TrainConfig::validate() const {
  policy.validate();
  for (double r : {r_train, r_train_audio, r_train_video}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("r_train values must lie in [0, 1]");
  }
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be nonnegative");
  if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be nonnegative");
  if (warmup_epochs >= epochs && epochs > 1) throw ConfigError("train.warmup_epochs must be below epochs");
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("MMTLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("MMTLAB_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return 1;
}

std::vector<InputPlan> training_plans(const std::vector<SyntheticSample>& train, const TrainConfig& cfg) {
  std::vector<InputPlan> plans;
  plans.reserve(train.size());
  for (const auto& s : train) plans.push_back(plan_from_presence(s.audio_present, s.video_present));
  std::vector<bool> audio_present(train.size()), video_present(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    audio_present[i] = train[i].audio_present;
    video_present[i] = train[i].video_present;
  }
  if (cfg.policy.designated == MissingDesignation::Both) {
    const DualSchedule d = build_dual_schedule(audio_present, video_present, cfg.r_train_audio, cfg.r_train_video,
                                               cfg.seed);
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (d.audio_missing[i]) plans[i].audio = Source::Missing;
      if (d.video_missing[i]) plans[i].video = Source::Missing;
    }
  } else {
    const Modality m = cfg.policy.designated == MissingDesignation::Audio ? Modality::Audio : Modality::Video;
    const MissingnessSchedule s =
        build_schedule(m == Modality::Audio ? audio_present : video_present, cfg.r_train, cfg.seed);
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (s.missing[i]) plans[i][m] = Source::Missing;
    }
  }
  return plans;
}

namespace {

struct WorkItem {
  std::size_t sample;
  InputPlan plan;
};

// Loss and gradients of one sample on its own tape.
double sample_gradients(const MbtModel& model, const SyntheticSample& s, const InputPlan& plan, ModelKind kind,
                        const std::vector<ClassWeights>& weights, const ForwardContext& ctx, Gradients& grads) {
  ad::Tape tape;
  HeadLogits logits;
  if (kind == ModelKind::Multimodal) {
    logits = forward_with_plan(tape, model, s.raw_audio, s.raw_video, plan, ctx);
  } else {
    const Modality m = kind == ModelKind::UnimodalAudio ? Modality::Audio : Modality::Video;
    logits = model.unimodal_forward(tape, model.embed(tape, s.raw(m), m), ctx);
  }
  std::vector<ad::Var> terms;
  for (std::size_t h = 0; h < logits.size(); ++h) {
    terms.push_back(weights.empty() ? ad::cross_entropy(logits[h], s.label(h))
                                    : weighted_cross_entropy(logits[h], s.label(h), weights[h]));
  }
  ad::Var loss = terms.front();
  for (std::size_t h = 1; h < terms.size(); ++h) loss = ad::add(loss, terms[h]);
  tape.backward(loss);
  tape.accumulate_gradients(model.params(), grads);
  return loss.value().item();
}

void add_into(Gradients& dst, const Gradients& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto d = dst[i].values();
    const auto s = src[i].values();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
  }
}

}  // namespace

TrainResult train_model(const std::vector<SyntheticSample>& train, const TokenizerConfig& tok,
                        const ModelConfig& model_cfg, const TrainConfig& cfg, const MbtModel* init,
                        std::ostream* log) {
  cfg.validate();
  MbtModel model = init ? *init : MbtModel(tok, model_cfg, cfg.seed);
  if (init && (init->config() != model_cfg || init->tokenizer() != tok)) {
    throw CheckpointError("initial model does not match the training configuration");
  }

  // Resolve which samples participate and how.
  const std::vector<InputPlan> plans = training_plans(train, cfg);
  std::vector<WorkItem> items;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const InputPlan& p = plans[i];
    switch (cfg.kind) {
      case ModelKind::UnimodalAudio:
        if (p.audio == Source::Raw) items.push_back({i, p});
        break;
      case ModelKind::UnimodalVideo:
        if (p.video == Source::Raw) items.push_back({i, p});
        break;
      case ModelKind::Multimodal:
        if (cfg.incomplete == IncompleteHandling::Filter && !p.complete()) break;
        items.push_back({i, p});
        break;
    }
  }
  if (items.empty()) throw DataError("no training samples remain after filtering");

  std::vector<ClassWeights> weights;
  if (cfg.class_weighted) {
    for (std::size_t h = 0; h < model_cfg.heads.size(); ++h) {
      std::vector<std::size_t> counts(model_cfg.heads[h].classes, 0);
      for (const auto& it : items) ++counts.at(train[it.sample].label(h));
      weights.push_back(class_weights(counts));
    }
  }

  const std::size_t steps_per_epoch = (items.size() + cfg.batch_size - 1) / cfg.batch_size;
  AdamWConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  opt_cfg.weight_decay = cfg.weight_decay;
  opt_cfg.warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  // One step past the last applied step so the final update is not zero.
  opt_cfg.total_steps = cfg.epochs * steps_per_epoch + 1;
  AdamW opt(model.params(), opt_cfg);

  const std::size_t threads = std::max<std::size_t>(1, std::min(worker_threads(), cfg.batch_size));
  std::vector<Gradients> partial(threads, Gradients(model.params()));
  Gradients grads(model.params());

  TrainResult result{model, {}, items.size()};
  SplitMix64 replace_rng = SplitMix64::stream(cfg.seed, "random-replace");
  std::vector<std::size_t> order(items.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng = SplitMix64::child(cfg.seed, "train-order", epoch);
    fisher_yates(order, shuffle_rng);

    // Plans for this epoch: one uniform draw per modal-complete sample.
    std::vector<InputPlan> epoch_plans(order.size());
    std::size_t substituted = 0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      InputPlan p = items[order[j]].plan;
      if (cfg.kind == ModelKind::Multimodal) {
        const double draw = p.complete() && cfg.policy.p > 0.0 ? replace_rng.uniform() : 1.0;
        p = random_replace(p, cfg.policy, draw);
        substituted += (p.audio == Source::Mmt || p.video == Source::Mmt) ? 1 : 0;
      }
      epoch_plans[j] = p;
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const MbtModel& frozen = result.model;
      std::vector<double> losses(end - start, 0.0);
      auto work = [&](std::size_t t) {
        partial[t].zero();
        for (std::size_t j = start + t; j < end; j += threads) {
          const std::size_t idx = items[order[j]].sample;
          SplitMix64 drop_rng = SplitMix64::child(cfg.seed, "dropout", epoch * train.size() + idx);
          const ForwardContext ctx{true, &drop_rng};
          losses[j - start] =
              sample_gradients(frozen, train[idx], epoch_plans[j], cfg.kind, weights, ctx, partial[t]);
        }
      };
      if (threads == 1) {
        work(0);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
      }
      // Fixed reduction order keeps results independent of thread timing
      // for a given thread count.
      grads.zero();
      for (std::size_t t = 0; t < threads; ++t) add_into(grads, partial[t]);
      grads.scale(1.0 / static_cast<double>(end - start));
      if (cfg.grad_clip > 0.0) {
        const double norm = grads.global_norm();
        if (norm > cfg.grad_clip) grads.scale(cfg.grad_clip / norm);
      }
      opt.step(result.model.params(), grads);
      for (double l : losses) loss_sum += l;
    }
    EpochLog e{epoch + 1, loss_sum / static_cast<double>(order.size()), opt.last_learning_rate(), order.size(),
               substituted};
    if (log) {
      *log << "epoch " << e.epoch << " loss " << e.mean_loss << " lr " << e.learning_rate << " samples " << e.samples
           << " substituted " << e.substituted << '\n';
    }
    result.log.push_back(e);
  }
  return result;
}

}  // namespace mmt
