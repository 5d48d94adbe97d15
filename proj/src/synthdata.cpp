#include "mmt/synthdata.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "mmt/binary_io.hpp"
#include "mmt/config.hpp"
#include "mmt/error.hpp"
#include "mmt/rng.hpp"

namespace mmt {

void SynthConfig::validate() const {
  if (classes_head_a < 2 || classes_head_b < 2) throw ConfigError("synth class counts must be at least 2");
  if (n_train == 0 || n_test == 0) throw ConfigError("synth split sizes must be positive");
  for (double a : {snr_a_for_code_a, snr_a_for_code_b, snr_v_for_code_a, snr_v_for_code_b}) {
    if (!(a >= 0.0)) throw ConfigError("synth amplitudes must be nonnegative");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("synth noise_std must be nonnegative");
  if (!(natural_missing_rate >= 0.0 && natural_missing_rate <= 1.0)) {
    throw ConfigError("synth natural_missing_rate must lie in [0, 1]");
  }
}

double SynthConfig::amplitude(Modality m, std::size_t code) const {
  if (m == Modality::Audio) return code == 0 ? snr_a_for_code_a : snr_a_for_code_b;
  return code == 0 ? snr_v_for_code_a : snr_v_for_code_b;
}

Tensor class_template(Modality m, std::size_t code, std::size_t cls, const SynthConfig& cfg,
                      const TokenizerConfig& geometry) {
  const std::size_t vol = geometry.patch_volume(m);
  if (!std::has_single_bit(vol)) {
    throw ConfigError("template construction needs a power-of-two patch volume, got " + std::to_string(vol));
  }
  if (1 + cfg.classes_head_a + cfg.classes_head_b > vol) {
    throw ConfigError("patch volume " + std::to_string(vol) + " is too small for the requested class counts");
  }
  // Walsh row (skipping the constant row 0) tiled across every patch.
  const std::size_t row = 1 + (code == 0 ? cls : cfg.classes_head_a + cls);
  const std::size_t n = geometry.token_count(m);
  Tensor patches({n, vol});
  const double norm = 1.0 / std::sqrt(static_cast<double>(n * vol));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < vol; ++k) {
      patches.at(p, k) = (std::popcount(row & k) % 2 == 0 ? 1.0 : -1.0) * norm;
    }
  }
  return unpatchify(patches, m, geometry);
}

namespace {

void generate_split(const SynthConfig& cfg, const TokenizerConfig& geo, std::size_t n, const char* split,
                    const std::vector<Tensor> (&templates)[2][2], std::vector<SyntheticSample>& out) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::child(cfg.seed, std::string("synth-") + split, i);
    SyntheticSample& s = out[i];
    s.label_a = static_cast<std::size_t>(rng.below(cfg.classes_head_a));
    s.label_b = static_cast<std::size_t>(rng.below(cfg.classes_head_b));
    for (Modality m : kModalities) {
      const int mi = m == Modality::Audio ? 0 : 1;
      Tensor raw(geo.raw_shape(m));
      const Tensor& ta = templates[mi][0][s.label_a];
      const Tensor& tb = templates[mi][1][s.label_b];
      const double aa = cfg.amplitude(m, 0), ab = cfg.amplitude(m, 1);
      for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = aa * ta[k] + ab * tb[k] + cfg.noise_std * rng.normal();
      (m == Modality::Audio ? s.raw_audio : s.raw_video) = std::move(raw);
    }
  }
  // Natural missingness: an exact-count prefix of a seeded permutation.
  const auto k = static_cast<std::size_t>(std::floor(cfg.natural_missing_rate * static_cast<double>(n) + 1e-9));
  if (k == 0) return;
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  SplitMix64 rng = SplitMix64::stream(cfg.seed, std::string("natural-missing-") + split);
  fisher_yates(ids, rng);
  for (std::size_t j = 0; j < k; ++j) {
    SyntheticSample& s = out[ids[j]];
    if (cfg.natural_missing_modality == Modality::Audio) {
      s.audio_present = false;
      s.raw_audio.fill(0.0);
    } else {
      s.video_present = false;
      s.raw_video.fill(0.0);
    }
  }
}

}  // namespace

Dataset generate(const SynthConfig& cfg, const TokenizerConfig& geometry) {
  cfg.validate();
  geometry.validate();
  std::vector<Tensor> templates[2][2];
  for (Modality m : kModalities) {
    const int mi = m == Modality::Audio ? 0 : 1;
    for (std::size_t c = 0; c < cfg.classes_head_a; ++c) templates[mi][0].push_back(class_template(m, 0, c, cfg, geometry));
    for (std::size_t c = 0; c < cfg.classes_head_b; ++c) templates[mi][1].push_back(class_template(m, 1, c, cfg, geometry));
  }
  Dataset ds{cfg, geometry, {}, {}};
  generate_split(cfg, geometry, cfg.n_train, "train", templates, ds.train);
  generate_split(cfg, geometry, cfg.n_test, "test", templates, ds.test);
  return ds;
}

double orthogonal_signal_accuracy(double snr, std::size_t classes) {
  if (classes < 2) throw ConfigError("need at least 2 classes");
  if (std::isinf(snr)) return 1.0;
  const double c = static_cast<double>(classes);
  if (snr <= 0.0) return 1.0 / c;
  // Simpson's rule on [snr - 12, snr + 12]; the integrand is negligible outside.
  const int steps = 4000;
  const double lo = snr - 12.0, hi = snr + 12.0, h = (hi - lo) / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + h * i;
    const double pdf = std::exp(-0.5 * (x - snr) * (x - snr)) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    const double f = pdf * std::pow(cdf, c - 1.0);
    acc += f * (i == 0 || i == steps ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0;
}

BayesBound bayes_accuracy_bound(const SynthConfig& cfg, bool use_audio, bool use_video) {
  auto head = [&](std::size_t code, std::size_t classes) {
    double energy = 0.0;
    if (use_audio) energy += cfg.amplitude(Modality::Audio, code) * cfg.amplitude(Modality::Audio, code);
    if (use_video) energy += cfg.amplitude(Modality::Video, code) * cfg.amplitude(Modality::Video, code);
    if (energy == 0.0) return 1.0 / static_cast<double>(classes);
    if (cfg.noise_std == 0.0) return 1.0;
    return orthogonal_signal_accuracy(std::sqrt(energy) / cfg.noise_std, classes);
  };
  return {head(0, cfg.classes_head_a), head(1, cfg.classes_head_b)};
}

std::vector<std::size_t> label_histogram(const std::vector<SyntheticSample>& split, std::size_t head,
                                         std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& s : split) {
    const std::size_t y = s.label(head);
    if (y >= classes) throw DataError("label out of range in histogram");
    ++counts[y];
  }
  return counts;
}

// ---- persistence -------------------------------------------------------------

namespace {

constexpr char kDatasetMagic[8] = {'M', 'M', 'T', 'D', 'A', 'T', 'A', '\0'};
constexpr std::uint32_t kDatasetVersion = 1;

void write_split(BinaryWriter& w, const std::vector<SyntheticSample>& split) {
  for (const auto& s : split) {
    w.u32(static_cast<std::uint32_t>(s.label_a));
    w.u32(static_cast<std::uint32_t>(s.label_b));
    w.u8(s.audio_present ? 1 : 0);
    w.u8(s.video_present ? 1 : 0);
    w.f64s(s.raw_audio.values());
    w.f64s(s.raw_video.values());
  }
}

void read_split(BinaryReader& r, std::size_t n, const TokenizerConfig& geo, std::vector<SyntheticSample>& out) {
  out.resize(n);
  for (auto& s : out) {
    s.label_a = r.u32();
    s.label_b = r.u32();
    s.audio_present = r.u8() != 0;
    s.video_present = r.u8() != 0;
    s.raw_audio = Tensor(geo.raw_shape(Modality::Audio));
    s.raw_video = Tensor(geo.raw_shape(Modality::Video));
    r.f64s(s.raw_audio.values());
    r.f64s(s.raw_video.values());
  }
}

}  // namespace

std::vector<unsigned char> serialize_dataset(const Dataset& ds) {
  nlohmann::json header;
  header["synth"] = ds.config;
  header["tokenizer"] = ds.geometry;
  const std::string header_text = header.dump();

  BinaryWriter w;
  w.bytes(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(header_text.size()));
  w.bytes(header_text.data(), header_text.size());
  w.u64(ds.train.size());
  w.u64(ds.test.size());
  write_split(w, ds.train);
  write_split(w, ds.test);
  return w.buffer();
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  BinaryWriter w;
  const auto bytes = serialize_dataset(ds);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);

  nlohmann::json side;
  for (const auto& [name, split] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
    std::size_t audio_missing = 0, video_missing = 0;
    for (const auto& s : *split) {
      audio_missing += s.audio_present ? 0 : 1;
      video_missing += s.video_present ? 0 : 1;
    }
    side[name] = {{"n", split->size()},
                  {"head_a", label_histogram(*split, 0, ds.config.classes_head_a)},
                  {"head_b", label_histogram(*split, 1, ds.config.classes_head_b)},
                  {"audio_missing", audio_missing},
                  {"video_missing", video_missing}};
  }
  std::ofstream sidecar(path.string() + ".json");
  if (!sidecar) throw FileError("cannot write " + path.string() + ".json");
  sidecar << side.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  BinaryReader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 8, kDatasetMagic)) throw DataError(path.string() + " is not a dataset file");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) throw DataError("unsupported dataset version " + std::to_string(version));
  std::string header_text(r.u32(), '\0');
  r.bytes(header_text.data(), header_text.size());
  const auto header = nlohmann::json::parse(header_text);
  Dataset ds;
  ds.config = header.at("synth").get<SynthConfig>();
  ds.geometry = header.at("tokenizer").get<TokenizerConfig>();
  const std::size_t n_train = r.u64();
  const std::size_t n_test = r.u64();
  read_split(r, n_train, ds.geometry, ds.train);
  read_split(r, n_test, ds.geometry, ds.test);
  r.expect_end();
  return ds;
}

}  // namespace mmt
