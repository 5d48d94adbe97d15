#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmt/mbt.hpp"
#include "mmt/missing.hpp"
#include "mmt/protocol.hpp"
#include "mmt/synthdata.hpp"

namespace mmt {

// What to do with samples the schedule marks incomplete.
enum class IncompleteHandling {
  Mmt,     // keep them; the missing modality is replaced by its MMT
  Filter,  // drop them and train on complete samples only
};
const char* incomplete_handling_name(IncompleteHandling h);
IncompleteHandling parse_incomplete_handling(const std::string& s);

struct TrainConfig {
  ModelKind kind = ModelKind::Multimodal;
  IncompleteHandling incomplete = IncompleteHandling::Mmt;
  TrainMissingPolicy policy;
  // Missing rate of the designated modality (single designation) or per
  // modality (designation "both"). Natural incompletes count toward it.
  double r_train = 0.0;
  double r_train_audio = 0.0;
  double r_train_video = 0.0;
  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  double learning_rate = 2e-3;
  double weight_decay = 0.5;
  std::size_t warmup_epochs = 1;
  double grad_clip = 1.0;  // global-norm clip, 0 disables
  bool class_weighted = false;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;  // rate of the last step in the epoch
  std::size_t samples = 0;
  std::size_t substituted = 0;  // samples fed with at least one MMT
};

struct TrainResult {
  MbtModel model;
  std::vector<EpochLog> log;
  std::size_t train_samples = 0;  // after filtering
};

// Per-sample training plans after applying the missingness schedule: the
// naturally or schedule-missing modality is marked Missing.
std::vector<InputPlan> training_plans(const std::vector<SyntheticSample>& train, const TrainConfig& cfg);

// Trains from scratch, or from `init` (a transferred encoder) when given.
TrainResult train_model(const std::vector<SyntheticSample>& train, const TokenizerConfig& tok,
                        const ModelConfig& model_cfg, const TrainConfig& cfg, const MbtModel* init = nullptr,
                        std::ostream* log = nullptr);

// Number of worker threads for batch gradients: MMTLAB_THREADS if set, else 1.
std::size_t worker_threads();

}  // namespace mmt
