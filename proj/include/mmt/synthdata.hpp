#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmt/tensor.hpp"
#include "mmt/tokenizer.hpp"

namespace mmt {

// Two-code synthetic classification data. Each modality's raw array is
//   amp(m, A) * T_m,A[label_a] + amp(m, B) * T_m,B[label_b] + noise_std * N(0, 1)
// with unit-norm, mutually orthogonal, patch-periodic Walsh templates, so a
// matched filter is Bayes-optimal and the optimal accuracy has a closed form.
struct SynthConfig {
  std::size_t classes_head_a = 4;
  std::size_t classes_head_b = 3;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  // Video carries code A more strongly than audio; audio leads on code B.
  // Video has the higher joint-head bound (dominant modality).
  double snr_a_for_code_a = 1.3;
  double snr_a_for_code_b = 1.2;
  double snr_v_for_code_a = 1.6;
  double snr_v_for_code_b = 1.0;
  double noise_std = 1.0;
  double natural_missing_rate = 0.0;
  Modality natural_missing_modality = Modality::Video;
  std::uint64_t seed = 7;

  void validate() const;
  double amplitude(Modality m, std::size_t code) const;  // code 0 = A, 1 = B
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SyntheticSample {
  Tensor raw_audio;
  Tensor raw_video;
  std::size_t label_a = 0;
  std::size_t label_b = 0;
  bool audio_present = true;
  bool video_present = true;

  std::size_t label(std::size_t head) const { return head == 0 ? label_a : label_b; }
  bool present(Modality m) const { return m == Modality::Audio ? audio_present : video_present; }
  const Tensor& raw(Modality m) const { return m == Modality::Audio ? raw_audio : raw_video; }
  friend bool operator==(const SyntheticSample&, const SyntheticSample&) = default;
};

struct Dataset {
  SynthConfig config;
  TokenizerConfig geometry;
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Unit-norm template for class `cls` of code 0 (A) or 1 (B) in modality m.
Tensor class_template(Modality m, std::size_t code, std::size_t cls, const SynthConfig& cfg,
                      const TokenizerConfig& geometry);

Dataset generate(const SynthConfig& cfg, const TokenizerConfig& geometry);

// Optimal accuracy of picking one of `classes` equal-energy orthogonal
// signals at amplitude/noise ratio `snr`: integral of phi(x - snr) Phi(x)^(C-1).
double orthogonal_signal_accuracy(double snr, std::size_t classes);

struct BayesBound {
  double head_a = 0.0;
  double head_b = 0.0;
  double joint() const { return head_a * head_b; }
};

BayesBound bayes_accuracy_bound(const SynthConfig& cfg, bool use_audio, bool use_video);

// Per-class label counts for one head over a split.
std::vector<std::size_t> label_histogram(const std::vector<SyntheticSample>& split, std::size_t head,
                                         std::size_t classes);

// Little-endian binary layout documented in docs/formats.md, plus a JSON
// sidecar "<path>.json" with the label histograms.
std::vector<unsigned char> serialize_dataset(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace mmt
