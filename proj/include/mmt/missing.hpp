#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmt/autodiff.hpp"
#include "mmt/mbt.hpp"
#include "mmt/tokenizer.hpp"

namespace mmt {

// How a modality enters the forward pass.
enum class Source {
  Raw,      // observed data, tokenized normally
  Missing,  // absent and not yet resolved by a substitution method
  Mmt,      // replaced by the missing-modality token
  Zeros,    // raw array replaced by zeros, then tokenized
  Skip,     // no tokens, branch omitted
};

struct InputPlan {
  Source audio = Source::Raw;
  Source video = Source::Raw;

  Source& operator[](Modality m) { return m == Modality::Audio ? audio : video; }
  Source operator[](Modality m) const { return m == Modality::Audio ? audio : video; }
  bool complete() const { return audio == Source::Raw && video == Source::Raw; }
  friend bool operator==(const InputPlan&, const InputPlan&) = default;
};

InputPlan plan_from_presence(bool audio_present, bool video_present);

enum class SubstitutionMethod { Mmt, Zeros, Skip };
const char* method_name(SubstitutionMethod m);
SubstitutionMethod parse_method(const std::string& s);

// Which modalities own a missing-modality token.
enum class MissingDesignation { Audio, Video, Both };
const char* designation_name(MissingDesignation d);
MissingDesignation parse_designation(const std::string& s);
bool designates(MissingDesignation d, Modality m);

enum class TrainMissingMode { LearnFromIncompleteOnly, RandomReplace };
const char* train_mode_name(TrainMissingMode m);
TrainMissingMode parse_train_mode(const std::string& s);

struct TrainMissingPolicy {
  TrainMissingMode mode = TrainMissingMode::RandomReplace;
  double p = 0.25;
  MissingDesignation designated = MissingDesignation::Video;

  // mode == LearnFromIncompleteOnly <=> p == 0; p in [0, 1].
  void validate() const;
  friend bool operator==(const TrainMissingPolicy&, const TrainMissingPolicy&) = default;
};

// Token i = mmt + pos_table[i]; the raw input is never read.
TokenSequence replace_with_mmt(ad::Var mmt, ad::Var pos_table, Modality m, std::size_t n_tokens);
TokenSequence replace_with_mmt(ad::Tape& tape, const MbtModel& model, Modality m);

// Resolves unresolved (Missing) modalities with the MMT where one exists and,
// for a complete plan, replaces a designated modality with probability p:
// draw < p in single-token mode; in dual mode draw < p/2 picks audio and
// p/2 <= draw < p picks video, so at most one modality is replaced.
InputPlan random_replace(InputPlan plan, const TrainMissingPolicy& policy, double draw);

// Missing -> Zeros / Skip / Mmt. Idempotent; complete plans are unchanged.
InputPlan substitute_zeros(InputPlan plan);
InputPlan substitute_skip(InputPlan plan);
InputPlan substitute_mmt(InputPlan plan);
InputPlan substitute(InputPlan plan, SubstitutionMethod method);

// Builds both modalities per the plan and runs the multimodal forward.
// Throws InvalidInputError for an unresolved Missing source or when every
// modality is skipped.
HeadLogits forward_with_plan(ad::Tape& tape, const MbtModel& model, const Tensor& raw_audio, const Tensor& raw_video,
                             const InputPlan& plan, const ForwardContext& ctx = {});

struct PlannedSample {
  const Tensor* raw_audio;
  const Tensor* raw_video;
  std::vector<std::size_t> labels;  // one per head
  InputPlan plan;
};

// True iff, for each modality, d(loss)/d(mmt) over the batch is nonzero
// exactly when some sample in the batch substituted that modality with MMT.
bool mmt_gradient_mask_check(const MbtModel& model, std::span<const PlannedSample> batch);

}  // namespace mmt
