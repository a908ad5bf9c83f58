#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bsr/classifier.hpp"
#include "bsr/data_io.hpp"
#include "bsr/features.hpp"

namespace bsr {

struct SyntheticSpec {
  int classes = 3;
  int per_class = 10;
  int h = 24, w = 21;
  int subspace_dim = 4;
  double noise_sigma = 2.0;
  std::uint64_t seed = 1;
};

struct FeatureSpec {
  std::string kind;  // "downsample" | "eigenfaces" | "laplacianfaces"
  int h = 0, w = 0;  // downsample target grid
  int dim = 0;       // subspace dimension for the projection methods
  int pca_dim = 0;   // laplacianfaces: 0 selects the default
  int k = 5;         // laplacianfaces neighborhood size
  double t = 0.0;    // laplacianfaces heat parameter, 0 selects the default
};

struct ClassifierSpec {
  std::string name;     // "bsbl" | "l1" | "block_l1" | "nn" | "ns"
  bool robust = false;  // solver-backed classifiers only
  int dim = 9;          // ns subspace dimension
};

/// Parsed experiment description. Exactly one of dataset_path / synthetic is
/// set. Block corruption entries carry the default occluder.
struct ExperimentConfig {
  std::optional<std::string> dataset_path;
  std::optional<SyntheticSpec> synthetic;
  SplitSpec split;
  std::vector<FeatureSpec> features;
  std::vector<ClassifierSpec> classifiers;
  std::vector<CorruptionSpec> corruption;
  int trials = 1;
  std::uint64_t seed = 0;
  // Wall-clock columns default to zero so identical configs reproduce
  // identical report bytes; set to true to record real timings.
  bool timings = false;
};

/// Parses the JSON configuration format documented in the README. Throws
/// InvalidInput with a key-specific message on malformed input.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// One grid cell result. Subspace features report (dim, 1) as their shape.
struct ReportRow {
  std::string classifier;  // name, with "+robust" appended in robust mode
  std::string feature;
  int dim_h = 0, dim_w = 0;
  std::string corruption;  // "none" | "pixel" | "block"
  double fraction = 0.0;
  int trial = 0;
  double rate = 0.0;  // correct / total; NaN when the cell errored
  double wall_ms = 0.0;
  std::vector<int> confusion;  // K x K row-major, true class by predicted
  std::string error;           // empty on success
};

struct ExperimentReport {
  std::string config_json;    // canonical dump of the parsed config
  std::string config_digest;  // FNV-1a 64-bit hash of config_json, hex
  std::string version = "1.0";
  int classes = 0;
  std::vector<ReportRow> rows;
};

/// Runs the full grid: classifiers x features x corruption levels x trials,
/// in that nested order. Every cell draws its randomness from a seed chained
/// as derive(derive(derive(derive(master, classifier_idx), feature_idx),
/// corruption_idx), trial), so results do not depend on execution order.
/// Splits are shared across cells of one trial. Module errors inside a cell
/// are captured into the row (rate = NaN) and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& config, int threads = 1);

enum class ReportFormat { kCsv, kJson, kMarkdown };

/// Renders the report: CSV with the fixed header
/// `classifier,feature,dim_h,dim_w,corruption,fraction,trial,rate,wall_ms`,
/// JSON embedding the config for provenance, or a markdown table per feature
/// with classifiers as rows and corruption levels as columns (mean rate over
/// trials, in percent).
std::string emit_report(const ExperimentReport& report, ReportFormat format);
void write_report(const ExperimentReport& report, ReportFormat format,
                  const std::string& path);

ReportFormat parse_format(const std::string& name);

}  // namespace bsr
