#include "mmt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmt/checkpoint.hpp"
#include "mmt/error.hpp"
#include "mmt/mae.hpp"
#include "mmt/train.hpp"

namespace mmt {

namespace {

constexpr int kManifestVersion = 1;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FileError("short write to " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string text_hash(const std::string& s) {
  return git_blob_hash({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

std::string dataset_hash(const Dataset& ds) { return git_blob_hash(serialize_dataset(ds)); }

// Resolved config with the run's seed list narrowed to what actually ran.
json resolved_config(const RunConfig& cfg, const fs::path& out, const std::vector<std::uint64_t>& seeds) {
  RunConfig r = cfg;
  r.seeds = seeds;
  r.out = out.string();
  return r;
}

json base_manifest(const std::string& command, const RunConfig& cfg, const fs::path& out,
                   const std::vector<std::uint64_t>& seeds) {
  return {{"version", kManifestVersion},
          {"command", command},
          {"config", resolved_config(cfg, out, seeds)},
          {"seeds", seeds}};
}

void write_run_files(const RunConfig& cfg, const fs::path& out, const std::vector<std::uint64_t>& seeds,
                     json manifest) {
  write_json(out / "config.json", resolved_config(cfg, out, seeds));
  manifest["config_hash"] = file_content_hash(out / "config.json");
  write_json(out / "manifest.json", manifest);
}

std::string ids_text(const std::vector<bool>& missing) {
  std::string s;
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (missing[i]) s += std::to_string(i) + '\n';
  }
  return s;
}

ModelKind kind_from_meta(const Checkpoint& ck) {
  if (!ck.meta.contains("kind")) return ModelKind::Multimodal;
  return parse_model_kind(ck.meta.at("kind").get<std::string>());
}

std::string number_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Dataset dataset_for(const RunConfig& cfg) { return generate(cfg.synth, cfg.tokenizer); }

json schedule_hashes(const RunConfig& cfg, std::uint64_t seed, const Dataset& ds) {
  json h = json::object();
  const auto plans = training_plans(ds.train, cfg.train_for_seed(seed));
  std::string train_text;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (!plans[i].complete())
      train_text += std::to_string(i) + ' ' + (plans[i].audio == Source::Raw ? "v" : "a") + '\n';
  }
  h["train"] = text_hash(train_text);
  for (const auto& v : make_test_variants(ds.test, cfg.eval.modality, cfg.eval.r_test, seed))
    h["test-" + format_rate(v.rate)] = text_hash(ids_text(v.missing));
  return h;
}

fs::path cmd_gen_data(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  std::ofstream log(out / "log.txt");
  const Dataset ds = dataset_for(cfg);
  const fs::path path = out / "dataset.bin";
  save_dataset(ds, path);
  log << "generated " << ds.train.size() << " train / " << ds.test.size() << " test samples\n";
  json m = base_manifest("gen-data", cfg, out, {});
  m["dataset"] = {{"path", "dataset.bin"}, {"hash", file_content_hash(path)}};
  const BayesBound joint = bayes_accuracy_bound(cfg.synth, true, true);
  const BayesBound audio = bayes_accuracy_bound(cfg.synth, true, false);
  const BayesBound video = bayes_accuracy_bound(cfg.synth, false, true);
  m["bayes_bound"] = {{"audio_video", {joint.head_a, joint.head_b}},
                      {"audio", {audio.head_a, audio.head_b}},
                      {"video", {video.head_a, video.head_b}}};
  write_run_files(cfg, out, {}, m);
  return path;
}

fs::path cmd_pretrain(const RunConfig& cfg, std::uint64_t seed, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  std::ofstream log(out / "log.txt");
  const Dataset ds = dataset_for(cfg);
  MaeConfig mae = cfg.mae;
  mae.seed = seed;
  const PretrainResult r = pretrain(ds.train, cfg.tokenizer, cfg.model, mae, &log);

  std::ostringstream curve;
  curve << "epoch,loss\n";
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) curve << e + 1 << ',' << number_text(r.epoch_loss[e]) << '\n';
  write_text(out / "pretrain_log.csv", curve.str());

  const fs::path path = out / "pretrain.ckpt";
  const json meta = {{"seed", seed}};
  const std::string hash = save_pretrain_checkpoint(r.encoder, r.decoder, mae, path, meta);
  json m = base_manifest("pretrain", cfg, out, {seed});
  m["dataset_hash"] = dataset_hash(ds);
  m["checkpoint"] = {{"path", "pretrain.ckpt"}, {"stage", "pretrain"}, {"hash", hash}};
  write_run_files(cfg, out, {seed}, m);
  return path;
}

fs::path cmd_train(const RunConfig& cfg, std::uint64_t seed, const fs::path& out,
                   const std::optional<fs::path>& pretrained) {
  cfg.validate();
  fs::create_directories(out);
  std::ofstream log(out / "log.txt");
  const Dataset ds = dataset_for(cfg);
  const TrainConfig tc = cfg.train_for_seed(seed);

  std::optional<MbtModel> init;
  std::string pretrained_hash;
  if (pretrained) {
    const Checkpoint ck = load_checkpoint(*pretrained);
    if (ck.stage != CheckpointStage::Pretrain)
      throw CheckpointError(pretrained->string() + " is a " + stage_name(ck.stage) + " checkpoint, expected pretrain");
    if (!(ck.tokenizer == cfg.tokenizer)) throw CheckpointError("pretrained tokenizer geometry differs from the config");
    init.emplace(transfer_encoder(ck.to_model(), cfg.model, seed));
    pretrained_hash = file_content_hash(*pretrained);
    log << "initialized from " << pretrained->string() << " (" << pretrained_hash << ")\n";
  }
  const TrainResult r = train_model(ds.train, cfg.tokenizer, cfg.model, tc, init ? &*init : nullptr, &log);

  std::ostringstream curve;
  curve << "epoch,mean_loss,learning_rate,samples,substituted\n";
  for (const auto& e : r.log)
    curve << e.epoch << ',' << number_text(e.mean_loss) << ',' << number_text(e.learning_rate) << ',' << e.samples
          << ',' << e.substituted << '\n';
  write_text(out / "train_log.csv", curve.str());

  const fs::path path = out / "model.ckpt";
  json tj = tc;
  tj["policy"] = tc.policy;
  const json meta = {{"kind", model_kind_name(tc.kind)}, {"seed", seed}, {"train", tj}};
  const std::string hash = save_finetune_checkpoint(r.model, path, meta);

  json m = base_manifest("train", cfg, out, {seed});
  m["dataset_hash"] = dataset_hash(ds);
  m["schedule_hashes"] = schedule_hashes(cfg, seed, ds);
  m["train_samples"] = r.train_samples;
  m["checkpoint"] = {{"path", "model.ckpt"}, {"stage", "finetune"}, {"hash", hash}};
  if (pretrained) m["pretrained"] = {{"path", pretrained->string()}, {"hash", pretrained_hash}};
  write_run_files(cfg, out, {seed}, m);
  return path;
}

MetricsTable cmd_eval(const RunConfig& cfg, std::uint64_t seed, const fs::path& checkpoint, const fs::path& out,
                      const std::vector<SubstitutionMethod>& methods, const std::vector<double>& r_test) {
  RunConfig c = cfg;
  if (!methods.empty()) c.eval.methods = methods;
  if (!r_test.empty()) {
    c.eval.r_test = r_test;
    std::sort(c.eval.r_test.begin(), c.eval.r_test.end());
    c.eval.r_test.erase(std::unique(c.eval.r_test.begin(), c.eval.r_test.end()), c.eval.r_test.end());
  }
  c.validate();
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.stage != CheckpointStage::Finetune)
    throw CheckpointError(checkpoint.string() + " is a pretrain checkpoint; fine-tune it before evaluating");
  if (!(ck.tokenizer == c.tokenizer)) throw CheckpointError("checkpoint tokenizer geometry differs from the config");
  if (ck.model.heads != c.model.heads) throw CheckpointError("checkpoint heads differ from the config");
  const MbtModel model = ck.to_model();
  const ModelKind kind = kind_from_meta(ck);

  fs::create_directories(out);
  std::ofstream log(out / "log.txt");
  const Dataset ds = dataset_for(c);
  const auto variants = make_test_variants(ds.test, c.eval.modality, c.eval.r_test, seed);
  MetricsTable table;
  for (SubstitutionMethod method : c.eval.methods) {
    for (const auto& v : variants) {
      const EvalResult e = evaluate(model, ds.test, v, method, kind, &log);
      for (std::size_t h = 0; h < e.accuracy.size(); ++h)
        table.add({method_name(method), v.rate, model.config().heads[h].name, seed, e.accuracy[h], e.n});
      log << method_name(method) << " r_test " << format_rate(v.rate) << "% missing " << v.missing_total()
          << " invalid " << e.invalid << '\n';
    }
  }
  table = table.sorted();
  table.save_csv(out / "metrics.csv");

  json m = base_manifest("eval", c, out, {seed});
  m["dataset_hash"] = dataset_hash(ds);
  m["schedule_hashes"] = schedule_hashes(c, seed, ds);
  m["checkpoint"] = {{"path", fs::absolute(checkpoint).string()}, {"hash", file_content_hash(checkpoint)}};
  m["model_kind"] = model_kind_name(kind);
  m["metrics"] = {{"path", "metrics.csv"}, {"hash", file_content_hash(out / "metrics.csv")}};
  write_run_files(c, out, {seed}, m);
  return table;
}

// ---- sweep ---------------------------------------------------------------------

const char* sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::P: return "p";
    case SweepAxis::FusionLayer: return "fusion_layer";
    case SweepAxis::RTrain: return "r_train";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "p") return SweepAxis::P;
  if (s == "fusion_layer") return SweepAxis::FusionLayer;
  if (s == "r_train") return SweepAxis::RTrain;
  throw ConfigError("unknown sweep axis '" + s + "' (expected p, fusion_layer or r_train)");
}

RunConfig apply_sweep_value(const RunConfig& cfg, SweepAxis axis, double value) {
  RunConfig c = cfg;
  switch (axis) {
    case SweepAxis::P:
      c.missing.p = value;
      c.missing.mode = value > 0.0 ? TrainMissingMode::RandomReplace : TrainMissingMode::LearnFromIncompleteOnly;
      break;
    case SweepAxis::FusionLayer: {
      if (value < 0.0 || value != std::floor(value)) throw ConfigError("fusion_layer values must be whole numbers");
      c.model.fusion_layer = static_cast<std::size_t>(value);
      break;
    }
    case SweepAxis::RTrain:
      c.train.r_train = value;
      break;
  }
  c.train.policy = c.missing;
  c.validate();
  return c;
}

std::string sweep_cell_name(SweepAxis axis, double value) {
  return std::string(sweep_axis_name(axis)) + "=" +
         (axis == SweepAxis::FusionLayer ? number_text(value) : format_rate(value));
}

MetricsTable cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& grid, const fs::path& out) {
  cfg.validate();
  if (grid.empty()) throw ConfigError("sweep grid must not be empty");
  std::vector<RunConfig> cells;
  for (double v : grid) cells.push_back(apply_sweep_value(cfg, axis, v));  // validates every value up front

  fs::create_directories(out);
  const fs::path manifest_path = out / "manifest.json";
  json manifest = base_manifest("sweep", cfg, out, cfg.seeds);
  manifest["axis"] = sweep_axis_name(axis);
  manifest["grid"] = grid;
  manifest["cells"] = json::object();
  if (fs::exists(manifest_path)) {
    const json old = read_json(manifest_path);
    if (old.value("command", "") != "sweep" || old.at("config") != manifest.at("config") ||
        old.value("axis", "") != manifest.at("axis"))
      throw ConfigError("existing manifest in " + out.string() + " belongs to a different sweep");
    manifest["cells"] = old.value("cells", json::object());
  }

  std::ofstream log(out / "log.txt", std::ios::app);
  const Dataset ds = dataset_for(cfg);
  manifest["dataset_hash"] = dataset_hash(ds);
  MetricsTable merged;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const std::string cell = sweep_cell_name(axis, grid[gi]);
    for (std::uint64_t seed : cfg.seeds) {
      const std::string key = cell + "/seed-" + std::to_string(seed);
      const fs::path dir = out / "cells" / cell / ("seed-" + std::to_string(seed));
      const fs::path metrics = dir / "metrics.csv";
      json& entry = manifest["cells"][key];
      const bool done = entry.is_object() && entry.value("status", "") == "done" && fs::exists(metrics) &&
                        entry.value("metrics_hash", "") == file_content_hash(metrics);
      if (done) {
        log << key << ": complete, skipped\n";
      } else {
        log << key << ": running\n";
        try {
          const fs::path ckpt = cmd_train(cells[gi], seed, dir);
          cmd_eval(cells[gi], seed, ckpt, dir);
        } catch (const Error& e) {
          throw Error(e.kind(), "sweep cell " + key + ": " + e.what());
        }
        entry = {{"status", "done"},
                 {"dir", fs::relative(dir, out).string()},
                 {"value", grid[gi]},
                 {"seed", seed},
                 {"checkpoint_hash", file_content_hash(dir / "model.ckpt")},
                 {"metrics_hash", file_content_hash(metrics)},
                 {"schedule_hashes", schedule_hashes(cells[gi], seed, ds)}};
        write_json(manifest_path, manifest);  // progress survives interruption
      }
      const MetricsTable cell_table = MetricsTable::load_csv(metrics);
      for (MetricsRow row : cell_table.rows()) {
        row.method += "@" + cell;
        merged.add(std::move(row));
      }
    }
  }
  merged = merged.sorted();
  merged.save_csv(out / "metrics.csv");
  manifest["metrics"] = {{"path", "metrics.csv"}, {"hash", file_content_hash(out / "metrics.csv")}};
  write_run_files(cfg, out, cfg.seeds, manifest);
  return merged;
}

// ---- report --------------------------------------------------------------------

std::vector<ReportCurve> report_curves(const MetricsTable& table) {
  // (head, method) -> r_test -> accuracies over seeds
  std::map<std::pair<std::string, std::string>, std::map<double, std::vector<double>>> acc;
  for (const auto& r : table.rows()) acc[{r.head, r.method}][r.r_test].push_back(r.accuracy);
  std::vector<ReportCurve> curves;
  for (const auto& [key, by_rate] : acc) {
    ReportCurve c{key.second, key.first, {}, {}, {}};
    for (const auto& [rate, xs] : by_rate) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= double(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      c.r_test.push_back(rate);
      c.mean.push_back(mean);
      c.stddev.push_back(xs.size() > 1 ? std::sqrt(var / double(xs.size() - 1)) : 0.0);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

std::string report_text(const std::vector<ReportCurve>& curves) {
  std::ostringstream os;
  std::string head;
  for (const auto& c : curves) {
    if (c.head != head) {
      head = c.head;
      os << (os.tellp() > 0 ? "\n" : "") << "head " << head << ": accuracy (%) vs r_test (%), mean over seeds\n";
    }
    os << "  " << c.method << '\n';
    for (std::size_t i = 0; i < c.r_test.size(); ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "    r_test %5s  %6.2f +- %5.2f  ", format_rate(c.r_test[i]).c_str(),
                    100.0 * c.mean[i], 100.0 * c.stddev[i]);
      os << line << std::string(static_cast<std::size_t>(std::lround(c.mean[i] * 50.0)), '#') << '\n';
    }
  }
  return os.str();
}

std::string report_svg(const std::vector<ReportCurve>& curves, const std::string& head) {
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double w = 640, h = 400, left = 60, right = 180, top = 30, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  auto sx = [&](double r) { return left + r * pw; };
  auto sy = [&](double a) { return top + (1.0 - a) * ph; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << left << "\" y=\"18\">head " << head << ": accuracy vs r_test</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double r = i / 4.0;
    os << "<line x1=\"" << sx(r) << "\" y1=\"" << top << "\" x2=\"" << sx(r) << "\" y2=\"" << top + ph
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << sx(r) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << i * 25
       << "%</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double a = i / 5.0;
    os << "<line x1=\"" << left << "\" y1=\"" << sy(a) << "\" x2=\"" << left + pw << "\" y2=\"" << sy(a)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(a) + 4 << "\" text-anchor=\"end\">" << i * 20 << "%</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">r_test</text>\n";
  std::size_t k = 0;
  for (const auto& c : curves) {
    if (c.head != head) continue;
    const char* color = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.r_test.size(); ++i) os << (i ? " " : "") << sx(c.r_test[i]) << ',' << sy(c.mean[i]);
    os << "\"/>\n";
    for (std::size_t i = 0; i < c.r_test.size(); ++i)
      os << "<circle cx=\"" << sx(c.r_test[i]) << "\" cy=\"" << sy(c.mean[i]) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    const double ly = top + 14.0 + 18.0 * double(k);
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">" << c.method << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<ReportCurve> cmd_report(const fs::path& metrics_csv, const fs::path& out) {
  if (!fs::is_regular_file(metrics_csv)) throw FileError("metrics file not found: " + metrics_csv.string());
  const MetricsTable table = MetricsTable::load_csv(metrics_csv);
  const auto curves = report_curves(table);
  fs::create_directories(out);
  write_text(out / "report.txt", report_text(curves));
  std::vector<std::string> heads;
  for (const auto& c : curves) {
    if (std::find(heads.begin(), heads.end(), c.head) == heads.end()) heads.push_back(c.head);
  }
  json files = json::array();
  for (const auto& head : heads) {
    const std::string name = "report-" + head + ".svg";
    write_text(out / name, report_svg(curves, head));
    files.push_back({{"path", name}, {"hash", file_content_hash(out / name)}});
  }
  write_text(out / "log.txt", "report of " + metrics_csv.string() + "\n");
  const json manifest = {{"version", kManifestVersion},
                         {"command", "report"},
                         {"metrics", {{"path", fs::absolute(metrics_csv).string()}, {"hash", file_content_hash(metrics_csv)}}},
                         {"report", {{"path", "report.txt"}, {"hash", file_content_hash(out / "report.txt")}}},
                         {"charts", files}};
  write_json(out / "manifest.json", manifest);
  return curves;
}

json error_record(const std::string& kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

}  // namespace mmt
