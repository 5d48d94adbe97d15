#include "mmt/missing.hpp"

#include <optional>

#include "mmt/error.hpp"

namespace mmt {

InputPlan plan_from_presence(bool audio_present, bool video_present) {
  return {audio_present ? Source::Raw : Source::Missing, video_present ? Source::Raw : Source::Missing};
}

const char* method_name(SubstitutionMethod m) {
  switch (m) {
    case SubstitutionMethod::Mmt: return "mmt";
    case SubstitutionMethod::Zeros: return "zeros";
    case SubstitutionMethod::Skip: return "skip";
  }
  return "?";
}

SubstitutionMethod parse_method(const std::string& s) {
  if (s == "mmt") return SubstitutionMethod::Mmt;
  if (s == "zeros") return SubstitutionMethod::Zeros;
  if (s == "skip") return SubstitutionMethod::Skip;
  throw ConfigError("unknown substitution method '" + s + "' (expected mmt, zeros or skip)");
}

const char* designation_name(MissingDesignation d) {
  switch (d) {
    case MissingDesignation::Audio: return "audio";
    case MissingDesignation::Video: return "video";
    case MissingDesignation::Both: return "both";
  }
  return "?";
}

MissingDesignation parse_designation(const std::string& s) {
  if (s == "audio") return MissingDesignation::Audio;
  if (s == "video") return MissingDesignation::Video;
  if (s == "both") return MissingDesignation::Both;
  throw ConfigError("unknown missing designation '" + s + "' (expected audio, video or both)");
}

bool designates(MissingDesignation d, Modality m) {
  return d == MissingDesignation::Both || (d == MissingDesignation::Audio) == (m == Modality::Audio);
}

const char* train_mode_name(TrainMissingMode m) {
  return m == TrainMissingMode::RandomReplace ? "random_replace" : "learn_from_incomplete_only";
}

TrainMissingMode parse_train_mode(const std::string& s) {
  if (s == "random_replace") return TrainMissingMode::RandomReplace;
  if (s == "learn_from_incomplete_only") return TrainMissingMode::LearnFromIncompleteOnly;
  throw ConfigError("unknown missing.mode '" + s + "'");
}

void TrainMissingPolicy::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("random-replace probability p must lie in [0, 1], got " + std::to_string(p));
  if (mode == TrainMissingMode::LearnFromIncompleteOnly && p != 0.0) {
    throw ConfigError("learn_from_incomplete_only requires p = 0");
  }
  if (mode == TrainMissingMode::RandomReplace && p == 0.0) {
    throw ConfigError("random_replace requires p > 0 (use learn_from_incomplete_only for p = 0)");
  }
}

TokenSequence replace_with_mmt(ad::Var mmt, ad::Var pos_table, Modality m, std::size_t n_tokens) {
  if (pos_table.rows() < n_tokens) {
    throw DimensionError("positional table has " + std::to_string(pos_table.rows()) + " rows, need " +
                         std::to_string(n_tokens));
  }
  TokenSequence seq;
  const ad::Var pos = pos_table.rows() == n_tokens ? pos_table : ad::slice_rows(pos_table, 0, n_tokens);
  seq.tokens = ad::add_row(pos, mmt);
  seq.positions.resize(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) seq.positions[i] = i;
  seq.modality = m;
  seq.present = true;
  seq.substituted = true;
  return seq;
}

TokenSequence replace_with_mmt(ad::Tape& tape, const MbtModel& model, Modality m) {
  const auto& params = model.params();
  return replace_with_mmt(tape.parameter(params, params.index(mmt_parameter_name(m))),
                          tape.parameter(params, params.index(position_table_name(m))), m,
                          model.tokenizer().token_count(m));
}

InputPlan random_replace(InputPlan plan, const TrainMissingPolicy& policy, double draw) {
  policy.validate();
  for (Modality m : kModalities) {
    if (plan[m] != Source::Missing) continue;
    if (!designates(policy.designated, m)) {
      throw InvalidInputError(std::string(modality_name(m)) +
                              " is missing but has no missing-modality token under this policy");
    }
    plan[m] = Source::Mmt;
  }
  if (!plan.complete() || draw >= policy.p) return plan;
  switch (policy.designated) {
    case MissingDesignation::Audio: plan.audio = Source::Mmt; break;
    case MissingDesignation::Video: plan.video = Source::Mmt; break;
    case MissingDesignation::Both:
      if (draw < 0.5 * policy.p) {
        plan.audio = Source::Mmt;
      } else {
        plan.video = Source::Mmt;
      }
      break;
  }
  return plan;
}

namespace {

InputPlan resolve(InputPlan plan, Source with) {
  for (Modality m : kModalities) {
    if (plan[m] == Source::Missing) plan[m] = with;
  }
  return plan;
}

}  // namespace

InputPlan substitute_zeros(InputPlan plan) { return resolve(plan, Source::Zeros); }
InputPlan substitute_mmt(InputPlan plan) { return resolve(plan, Source::Mmt); }

InputPlan substitute_skip(InputPlan plan) {
  plan = resolve(plan, Source::Skip);
  if (plan.audio == Source::Skip && plan.video == Source::Skip) {
    throw InvalidInputError("skip substitution with every modality missing leaves no tokens to classify");
  }
  return plan;
}

InputPlan substitute(InputPlan plan, SubstitutionMethod method) {
  switch (method) {
    case SubstitutionMethod::Mmt: return substitute_mmt(plan);
    case SubstitutionMethod::Zeros: return substitute_zeros(plan);
    case SubstitutionMethod::Skip: return substitute_skip(plan);
  }
  return plan;
}

HeadLogits forward_with_plan(ad::Tape& tape, const MbtModel& model, const Tensor& raw_audio, const Tensor& raw_video,
                             const InputPlan& plan, const ForwardContext& ctx) {
  std::optional<TokenSequence> seqs[2];
  for (Modality m : kModalities) {
    const Tensor& raw = m == Modality::Audio ? raw_audio : raw_video;
    auto& slot = seqs[m == Modality::Audio ? 0 : 1];
    switch (plan[m]) {
      case Source::Raw: slot = model.embed(tape, raw, m); break;
      case Source::Zeros: slot = model.embed(tape, Tensor(model.tokenizer().raw_shape(m)), m); break;
      case Source::Mmt: slot = replace_with_mmt(tape, model, m); break;
      case Source::Skip: break;
      case Source::Missing:
        throw InvalidInputError(std::string(modality_name(m)) + " is missing and no substitution was chosen");
    }
  }
  return model.forward_present(tape, seqs[0] ? &*seqs[0] : nullptr, seqs[1] ? &*seqs[1] : nullptr, ctx);
}

bool mmt_gradient_mask_check(const MbtModel& model, std::span<const PlannedSample> batch) {
  const auto& params = model.params();
  Gradients grads(params);
  bool used[2] = {false, false};
  for (const auto& s : batch) {
    ad::Tape tape;
    const HeadLogits logits = forward_with_plan(tape, model, *s.raw_audio, *s.raw_video, s.plan);
    std::vector<ad::Var> losses;
    for (std::size_t h = 0; h < logits.size(); ++h) losses.push_back(ad::cross_entropy(logits[h], s.labels.at(h)));
    ad::Var total = losses.front();
    for (std::size_t h = 1; h < losses.size(); ++h) total = ad::add(total, losses[h]);
    tape.backward(total);
    tape.accumulate_gradients(params, grads);
    for (Modality m : kModalities) used[m == Modality::Audio ? 0 : 1] |= s.plan[m] == Source::Mmt;
  }
  for (Modality m : kModalities) {
    const Tensor& g = grads[params.index(mmt_parameter_name(m))];
    bool nonzero = false;
    for (double v : g.values()) nonzero |= v != 0.0;
    if (nonzero != used[m == Modality::Audio ? 0 : 1]) return false;
  }
  return true;
}

}  // namespace mmt
