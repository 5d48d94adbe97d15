#include "mmt/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "mmt/error.hpp"
#include "mmt/rng.hpp"

namespace mmt {

std::size_t missing_count(double rate, std::size_t n) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("missing rate must lie in [0, 1], got " + std::to_string(rate));
  return std::min(n, static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9)));
}

std::size_t MissingnessSchedule::missing_total() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
}

std::vector<bool> MissingnessSchedule::mask_at(double r) const {
  const std::size_t k = missing_count(r, order.size());
  if (k < natural_count) {
    throw InfeasibleError("rate " + std::to_string(r) + " is below the natural incomplete rate " +
                          std::to_string(natural_rate()));
  }
  std::vector<bool> mask(order.size(), false);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = true;
  return mask;
}

namespace {

std::vector<std::size_t> shuffled_complete(const std::vector<bool>& present, std::uint64_t seed, std::string_view stream,
                                           const std::vector<bool>& also_present = {}) {
  std::vector<std::size_t> complete;
  for (std::size_t i = 0; i < present.size(); ++i) {
    if (present[i] && (also_present.empty() || also_present[i])) complete.push_back(i);
  }
  SplitMix64 rng = SplitMix64::stream(seed, stream);
  fisher_yates(complete, rng);
  return complete;
}

}  // namespace

MissingnessSchedule build_schedule(const std::vector<bool>& present, double rate, std::uint64_t seed,
                                   std::string_view stream) {
  MissingnessSchedule s;
  for (std::size_t i = 0; i < present.size(); ++i) {
    if (!present[i]) s.order.push_back(i);
  }
  s.natural_count = s.order.size();
  const auto rest = shuffled_complete(present, seed, stream);
  s.order.insert(s.order.end(), rest.begin(), rest.end());
  s.rate = rate;
  s.missing = s.mask_at(rate);
  return s;
}

DualSchedule build_dual_schedule(const std::vector<bool>& audio_present, const std::vector<bool>& video_present,
                                 double rate_audio, double rate_video, std::uint64_t seed, std::string_view stream) {
  if (audio_present.size() != video_present.size()) throw DimensionError("presence vectors differ in length");
  const std::size_t n = audio_present.size();
  DualSchedule d{std::vector<bool>(n, false), std::vector<bool>(n, false)};
  std::size_t natural_audio = 0, natural_video = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!audio_present[i]) {
      d.audio_missing[i] = true;
      ++natural_audio;
    }
    if (!video_present[i]) {
      d.video_missing[i] = true;
      ++natural_video;
    }
  }
  const std::size_t ka = missing_count(rate_audio, n), kv = missing_count(rate_video, n);
  if (ka < natural_audio || kv < natural_video) {
    throw InfeasibleError("requested per-modality rates are below the natural incomplete rates (audio " +
                          std::to_string(double(natural_audio) / double(n)) + ", video " +
                          std::to_string(double(natural_video) / double(n)) + ")");
  }
  const auto complete = shuffled_complete(audio_present, seed, stream, video_present);
  if ((ka - natural_audio) + (kv - natural_video) > complete.size()) {
    throw InfeasibleError("not enough complete samples for the requested per-modality rates");
  }
  std::size_t next = 0;
  for (std::size_t j = natural_audio; j < ka; ++j) d.audio_missing[complete[next++]] = true;
  for (std::size_t j = natural_video; j < kv; ++j) d.video_missing[complete[next++]] = true;
  return d;
}

std::size_t TestVariant::missing_total() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
}

std::vector<TestVariant> make_test_variants(const std::vector<SyntheticSample>& test, Modality modality,
                                            std::span<const double> rates, std::uint64_t seed) {
  if (!std::is_sorted(rates.begin(), rates.end())) throw ConfigError("test rates must be sorted ascending");
  std::vector<bool> present(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) present[i] = test[i].present(modality);
  std::vector<TestVariant> out;
  if (rates.empty()) return out;
  const MissingnessSchedule s = build_schedule(present, rates.front(), seed, "test-missing");
  for (double r : rates) out.push_back({r, modality, s.mask_at(r)});
  return out;
}

ClassWeights class_weights(std::span<const std::size_t> counts) {
  ClassWeights w;
  w.counts.assign(counts.begin(), counts.end());
  w.total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (w.total == 0) throw DataError("class weights need at least one labelled sample");
  for (std::size_t c : counts) w.weights.push_back(1.0 - static_cast<double>(c) / static_cast<double>(w.total));
  return w;
}

ClassWeights class_weights_for(const std::vector<SyntheticSample>& train, std::size_t head, std::size_t classes) {
  const auto hist = label_histogram(train, head, classes);
  return class_weights(hist);
}

ad::Var weighted_cross_entropy(ad::Var logits, std::size_t label, const ClassWeights& weights) {
  if (label >= weights.weights.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(weights.weights.size()) +
                    " class weights");
  }
  return ad::cross_entropy(logits, label, weights.weights[label]);
}

// ---- metrics ------------------------------------------------------------------

std::string format_rate(double r_test) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", r_test * 100.0);
  return buf;
}

void MetricsTable::add(MetricsRow row) {
  if (!(row.accuracy >= 0.0 && row.accuracy <= 1.0)) throw DataError("accuracy outside [0, 1]");
  rows_.push_back(std::move(row));
}

void MetricsTable::append(const MetricsTable& other) {
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

MetricsTable MetricsTable::sorted() const {
  MetricsTable t = *this;
  std::stable_sort(t.rows_.begin(), t.rows_.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.method, a.r_test, a.head, a.seed) < std::tie(b.method, b.r_test, b.head, b.seed);
  });
  return t;
}

double MetricsTable::accuracy(std::string_view method, double r_test, std::string_view head, std::uint64_t seed) const {
  for (const auto& r : rows_) {
    if (r.method == method && std::abs(r.r_test - r_test) < 1e-9 && r.head == head && r.seed == seed) return r.accuracy;
  }
  throw DataError("no metrics row for method=" + std::string(method) + " r_test=" + format_rate(r_test) +
                  " head=" + std::string(head) + " seed=" + std::to_string(seed));
}

void MetricsTable::write_csv(std::ostream& os) const {
  os << kCsvHeader << '\n';
  char acc[32];
  for (const auto& r : rows_) {
    std::snprintf(acc, sizeof acc, "%.6f", r.accuracy);
    os << r.method << ',' << format_rate(r.r_test) << ',' << r.head << ',' << r.seed << ',' << acc << ',' << r.n
       << '\n';
  }
}

void MetricsTable::save_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  write_csv(out);
}

MetricsTable MetricsTable::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw DataError("metrics CSV must start with header '" + std::string(kCsvHeader) + "'");
  MetricsTable t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw DataError("malformed metrics row: " + line);
    try {
      t.add({f[0], std::stod(f[1]) / 100.0, f[2], std::stoull(f[3]), std::stod(f[4]), std::stoull(f[5])});
    } catch (const std::invalid_argument&) {
      throw DataError("malformed metrics row: " + line);
    }
  }
  return t;
}

MetricsTable MetricsTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  return read_csv(in);
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Multimodal: return "multimodal";
    case ModelKind::UnimodalAudio: return "unimodal_audio";
    case ModelKind::UnimodalVideo: return "unimodal_video";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "multimodal") return ModelKind::Multimodal;
  if (s == "unimodal_audio") return ModelKind::UnimodalAudio;
  if (s == "unimodal_video") return ModelKind::UnimodalVideo;
  throw ConfigError("unknown model_kind '" + s + "'");
}

// ---- evaluation -----------------------------------------------------------------

std::vector<std::size_t> predict(const MbtModel& model, const SyntheticSample& sample, const InputPlan& plan,
                                 ModelKind kind) {
  ad::Tape tape;
  HeadLogits logits;
  if (kind == ModelKind::Multimodal) {
    logits = forward_with_plan(tape, model, sample.raw_audio, sample.raw_video, plan);
  } else {
    const Modality m = kind == ModelKind::UnimodalAudio ? Modality::Audio : Modality::Video;
    if (plan[m] != Source::Raw) throw InvalidInputError("unimodal model input is missing");
    logits = model.unimodal_forward(tape, model.embed(tape, sample.raw(m), m));
  }
  std::vector<std::size_t> out;
  for (const auto& l : logits) {
    const auto v = l.value().values();
    out.push_back(static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin()));
  }
  return out;
}

EvalResult evaluate(const MbtModel& model, const std::vector<SyntheticSample>& test, const TestVariant& variant,
                    SubstitutionMethod method, ModelKind kind, std::ostream* warnings) {
  if (variant.missing.size() != test.size()) throw DimensionError("test variant does not match the test split size");
  const std::size_t heads = model.config().heads.size();
  std::vector<std::size_t> correct(heads, 0);
  EvalResult res;
  res.n = test.size();
  for (std::size_t i = 0; i < test.size(); ++i) {
    const SyntheticSample& s = test[i];
    InputPlan plan = plan_from_presence(s.audio_present, s.video_present);
    if (variant.missing[i]) plan[variant.modality] = Source::Missing;
    if (kind != ModelKind::Multimodal) {
      // A unimodal model sees its own modality regardless of the variant.
      plan = {Source::Raw, Source::Raw};
    }
    std::vector<std::size_t> pred;
    try {
      pred = predict(model, s, kind == ModelKind::Multimodal ? substitute(plan, method) : plan, kind);
    } catch (const InvalidInputError& e) {
      ++res.invalid;
      if (warnings) *warnings << "warning: sample " << i << " has no valid prediction path (" << e.what() << ")\n";
      continue;
    }
    for (std::size_t h = 0; h < heads; ++h) correct[h] += pred[h] == s.label(h) ? 1 : 0;
  }
  for (std::size_t h = 0; h < heads; ++h) res.accuracy.push_back(double(correct[h]) / double(test.size()));
  return res;
}

void evaluate_into(MetricsTable& table, const std::string& method_label, const MbtModel& model,
                   const std::vector<SyntheticSample>& test, const TestVariant& variant, SubstitutionMethod method,
                   std::uint64_t seed, ModelKind kind) {
  const EvalResult r = evaluate(model, test, variant, method, kind);
  for (std::size_t h = 0; h < r.accuracy.size(); ++h) {
    table.add({method_label, variant.rate, model.config().heads[h].name, seed, r.accuracy[h], r.n});
  }
}

}  // namespace mmt
