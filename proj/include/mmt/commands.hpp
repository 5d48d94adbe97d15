#pragma once

// Library side of the mmtlab command line. Every command writes into its
// output directory the resolved config (config.json), a manifest with content
// hashes (manifest.json), a log (log.txt) and its own artifacts.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmt/config.hpp"
#include "mmt/protocol.hpp"

namespace mmt {

namespace fs = std::filesystem;

// Dataset described by the config (synth + tokenizer geometry).
Dataset dataset_for(const RunConfig& cfg);

// Content hashes of the missing-id sets a run uses: the training plans and
// every test variant, keyed "train" and "test-<rate%>".
nlohmann::json schedule_hashes(const RunConfig& cfg, std::uint64_t seed, const Dataset& ds);

fs::path cmd_gen_data(const RunConfig& cfg, const fs::path& out);
fs::path cmd_pretrain(const RunConfig& cfg, std::uint64_t seed, const fs::path& out);
// Fine-tunes from `pretrained` (a pretrain-stage checkpoint) when given.
fs::path cmd_train(const RunConfig& cfg, std::uint64_t seed, const fs::path& out,
                   const std::optional<fs::path>& pretrained = std::nullopt);
// Methods and r_test grid default to cfg.eval.
MetricsTable cmd_eval(const RunConfig& cfg, std::uint64_t seed, const fs::path& checkpoint, const fs::path& out,
                      const std::vector<SubstitutionMethod>& methods = {},
                      const std::vector<double>& r_test = {});

enum class SweepAxis { P, FusionLayer, RTrain };
const char* sweep_axis_name(SweepAxis a);  // "p", "fusion_layer", "r_train"
SweepAxis parse_sweep_axis(const std::string& s);

// Applies one grid value (a fraction for p and r_train, a layer index for
// fusion_layer) to a copy of the config.
RunConfig apply_sweep_value(const RunConfig& cfg, SweepAxis axis, double value);
std::string sweep_cell_name(SweepAxis axis, double value);  // e.g. "p=25", "fusion_layer=2"

// Train + eval per (value, seed) under out/cells/<cell>/seed-<s>/. Cells
// already recorded in out/manifest.json with matching metrics hashes are not
// re-run. The merged out/metrics.csv labels methods "<method>@<cell>".
MetricsTable cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& grid, const fs::path& out);

struct ReportCurve {
  std::string method;
  std::string head;
  std::vector<double> r_test;  // ascending fractions
  std::vector<double> mean;    // over seeds
  std::vector<double> stddev;
};

// Seed-averaged accuracy-vs-r_test curves, sorted by (head, method).
std::vector<ReportCurve> report_curves(const MetricsTable& table);
std::string report_text(const std::vector<ReportCurve>& curves);
std::string report_svg(const std::vector<ReportCurve>& curves, const std::string& head);
// Writes report.txt and report-<head>.svg; returns the curves.
std::vector<ReportCurve> cmd_report(const fs::path& metrics_csv, const fs::path& out);

// {"error": {"kind": ..., "message": ...}}
nlohmann::json error_record(const std::string& kind, const std::string& message);

}  // namespace mmt
