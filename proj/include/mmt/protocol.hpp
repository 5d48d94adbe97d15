#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/autodiff.hpp"
#include "mmt/mbt.hpp"
#include "mmt/missing.hpp"
#include "mmt/synthdata.hpp"

namespace mmt {

// floor(rate * n), robust to representation error (0.29 * 100 -> 29).
std::size_t missing_count(double rate, std::size_t n);

// Cumulative missingness assignment for one modality. `order` lists the
// naturally incomplete ids first (ascending) and then every complete id in a
// seeded Fisher-Yates order; the missing set at any rate is a prefix of it,
// so sets at increasing rates are nested.
struct MissingnessSchedule {
  std::vector<std::size_t> order;
  std::size_t natural_count = 0;
  double rate = 0.0;
  std::vector<bool> missing;  // per sample id, at `rate`

  std::size_t size() const noexcept { return order.size(); }
  double natural_rate() const { return order.empty() ? 0.0 : double(natural_count) / double(order.size()); }
  std::size_t missing_total() const;
  // Missing mask at another rate on the same ordering.
  std::vector<bool> mask_at(double r) const;
};

// Throws InfeasibleError when rate is below the natural incomplete rate.
MissingnessSchedule build_schedule(const std::vector<bool>& present, double rate, std::uint64_t seed,
                                   std::string_view stream = "train-missing");

// Two disjoint missing sets (audio, video) drawn from one cumulative list:
// natural audio-missing ids, natural video-missing ids, then shuffled
// complete ids; audio takes from the head of the complete list, video from
// what follows.
struct DualSchedule {
  std::vector<bool> audio_missing;
  std::vector<bool> video_missing;
};
DualSchedule build_dual_schedule(const std::vector<bool>& audio_present, const std::vector<bool>& video_present,
                                 double rate_audio, double rate_video, std::uint64_t seed,
                                 std::string_view stream = "train-missing");

// A test variant is a view: the ids whose `modality` is treated as missing at
// `rate` (natural incompletes included). Data is never copied or altered.
struct TestVariant {
  double rate = 0.0;
  Modality modality = Modality::Video;
  std::vector<bool> missing;
  std::size_t missing_total() const;
};

std::vector<TestVariant> make_test_variants(const std::vector<SyntheticSample>& test, Modality modality,
                                            std::span<const double> rates, std::uint64_t seed);

struct ClassWeights {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  std::vector<double> weights;  // 1 - counts[i] / total
};

ClassWeights class_weights(std::span<const std::size_t> counts);
ClassWeights class_weights_for(const std::vector<SyntheticSample>& train, std::size_t head, std::size_t classes);

ad::Var weighted_cross_entropy(ad::Var logits, std::size_t label, const ClassWeights& weights);

// ---- metrics ------------------------------------------------------------------

struct MetricsRow {
  std::string method;
  double r_test = 0.0;  // fraction in [0, 1]
  std::string head;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::size_t n = 0;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

class MetricsTable {
 public:
  void add(MetricsRow row);
  void append(const MetricsTable& other);
  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  // Sorted by (method, r_test, head, seed) for deterministic merging.
  MetricsTable sorted() const;
  // Accuracy lookup; throws DataError if absent.
  double accuracy(std::string_view method, double r_test, std::string_view head, std::uint64_t seed) const;

  static constexpr const char* kCsvHeader = "method,r_test,head,seed,accuracy,n";
  void write_csv(std::ostream& os) const;
  void save_csv(const std::filesystem::path& path) const;
  static MetricsTable read_csv(std::istream& is);
  static MetricsTable load_csv(const std::filesystem::path& path);

  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;

 private:
  std::vector<MetricsRow> rows_;
};

std::string format_rate(double r_test);  // percent, e.g. "25"

enum class ModelKind { Multimodal, UnimodalAudio, UnimodalVideo };
const char* model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct EvalResult {
  std::vector<double> accuracy;  // per head
  std::size_t n = 0;
  std::size_t invalid = 0;       // samples with no valid prediction path
};

// Top-1 accuracy per head over the test split with the variant's missing set
// resolved by `method`. Unimodal models always read their own modality.
EvalResult evaluate(const MbtModel& model, const std::vector<SyntheticSample>& test, const TestVariant& variant,
                    SubstitutionMethod method, ModelKind kind = ModelKind::Multimodal,
                    std::ostream* warnings = nullptr);

// Appends one row per head.
void evaluate_into(MetricsTable& table, const std::string& method_label, const MbtModel& model,
                   const std::vector<SyntheticSample>& test, const TestVariant& variant, SubstitutionMethod method,
                   std::uint64_t seed, ModelKind kind = ModelKind::Multimodal);

// Predicted class per head for one planned sample.
std::vector<std::size_t> predict(const MbtModel& model, const SyntheticSample& sample, const InputPlan& plan,
                                 ModelKind kind);

}  // namespace mmt
