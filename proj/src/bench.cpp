#include "bsr/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include "bsr/errors.hpp"
#include "bsr/rng.hpp"

namespace bsr {
namespace {

using nlohmann::json;

const json* find_key(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

bool solver_backed(const std::string& name) {
  return name == "bsbl" || name == "l1" || name == "block_l1";
}

std::string corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kNone: return "none";
    case CorruptionKind::kPixel: return "pixel";
    case CorruptionKind::kBlock: return "block";
  }
  return "?";
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.dataset_path.has_value() == cfg.synthetic.has_value())
    throw InvalidInput("config: dataset needs exactly one of path or synthetic");
  if (cfg.features.empty())
    throw InvalidInput("config: features must be a non-empty array");
  if (cfg.classifiers.empty())
    throw InvalidInput("config: classifiers must be a non-empty array");
  if (cfg.trials < 1) throw InvalidInput("config: trials must be at least 1");
  if (cfg.split.mode == SplitMode::kManifest) {
    if (cfg.split.manifest.empty())
      throw InvalidInput("config: split.manifest must name the training list");
    if (!cfg.dataset_path)
      throw InvalidInput("config: manifest splits need a directory dataset");
  }
  for (const ClassifierSpec& cs : cfg.classifiers) {
    if (!solver_backed(cs.name) && cs.name != "nn" && cs.name != "ns")
      throw InvalidInput("config: unknown classifier '" + cs.name + "'");
    if (cs.robust && !solver_backed(cs.name))
      throw InvalidInput(
          "config: robust mode applies only to solver-backed classifiers");
    if (cs.name == "ns" && cs.dim < 1)
      throw InvalidInput("config: ns classifiers need a positive dim");
  }
  for (const CorruptionSpec& spec : cfg.corruption) spec.validate();
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.dataset_path) {
    j["dataset"] = {{"path", *c.dataset_path}};
  } else if (c.synthetic) {
    const SyntheticSpec& s = *c.synthetic;
    j["dataset"] = {{"synthetic",
                     {{"classes", s.classes},
                      {"per_class", s.per_class},
                      {"h", s.h},
                      {"w", s.w},
                      {"subspace_dim", s.subspace_dim},
                      {"noise_sigma", s.noise_sigma},
                      {"seed", s.seed}}}};
  }
  json sp;
  if (c.split.mode == SplitMode::kPerClassRatio) {
    sp["mode"] = "ratio";
    sp["ratio"] = c.split.ratio;
  } else if (c.split.mode == SplitMode::kPerClassCount) {
    sp["mode"] = "count";
    sp["count"] = c.split.count;
  } else {
    sp["mode"] = "manifest";
    sp["manifest"] = c.split.manifest;
  }
  sp["seed"] = c.split.seed;
  j["split"] = sp;

  json feats = json::array();
  for (const FeatureSpec& f : c.features) {
    json e{{"kind", f.kind}};
    if (f.kind == "downsample") {
      e["h"] = f.h;
      e["w"] = f.w;
    } else {
      e["dim"] = f.dim;
      if (f.kind == "laplacianfaces") {
        e["pca_dim"] = f.pca_dim;
        e["k"] = f.k;
        e["t"] = f.t;
      }
    }
    feats.push_back(e);
  }
  j["features"] = feats;

  json cls = json::array();
  for (const ClassifierSpec& cs : c.classifiers) {
    json e{{"name", cs.name}};
    if (solver_backed(cs.name)) e["robust"] = cs.robust;
    if (cs.name == "ns") e["dim"] = cs.dim;
    cls.push_back(e);
  }
  j["classifiers"] = cls;

  json corr = json::array();
  for (const CorruptionSpec& spec : c.corruption) {
    json e{{"kind", corruption_name(spec.kind)}};
    if (spec.kind != CorruptionKind::kNone) e["fraction"] = spec.fraction;
    corr.push_back(e);
  }
  j["corruption"] = corr;

  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["timings"] = c.timings;
  return j;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    if (!j.is_object())
      throw InvalidInput("config: top level must be an object");
    ExperimentConfig cfg;

    const json* ds = find_key(j, "dataset");
    if (!ds || !ds->is_object())
      throw InvalidInput("config: dataset object is required");
    const json* path = find_key(*ds, "path");
    const json* synth = find_key(*ds, "synthetic");
    if ((path != nullptr) == (synth != nullptr))
      throw InvalidInput(
          "config: dataset needs exactly one of path or synthetic");
    if (path) {
      cfg.dataset_path = path->get<std::string>();
    } else {
      SyntheticSpec s;
      s.classes = synth->value("classes", s.classes);
      s.per_class = synth->value("per_class", s.per_class);
      s.h = synth->value("h", s.h);
      s.w = synth->value("w", s.w);
      s.subspace_dim = synth->value("subspace_dim", s.subspace_dim);
      s.noise_sigma = synth->value("noise_sigma", s.noise_sigma);
      s.seed = synth->value("seed", s.seed);
      cfg.synthetic = s;
    }

    if (const json* sp = find_key(j, "split")) {
      std::string mode = sp->value("mode", std::string("ratio"));
      if (mode == "ratio")
        cfg.split.mode = SplitMode::kPerClassRatio;
      else if (mode == "count")
        cfg.split.mode = SplitMode::kPerClassCount;
      else if (mode == "manifest")
        cfg.split.mode = SplitMode::kManifest;
      else
        throw InvalidInput("config: split.mode must be ratio, count, or manifest");
      cfg.split.ratio = sp->value("ratio", cfg.split.ratio);
      cfg.split.count = sp->value("count", cfg.split.count);
      cfg.split.manifest = sp->value("manifest", cfg.split.manifest);
      cfg.split.seed = sp->value("seed", cfg.split.seed);
    }

    const json* feats = find_key(j, "features");
    if (!feats || !feats->is_array() || feats->empty())
      throw InvalidInput("config: features must be a non-empty array");
    for (const json& f : *feats) {
      FeatureSpec fs;
      fs.kind = f.value("kind", std::string());
      if (fs.kind == "downsample") {
        fs.h = f.value("h", 0);
        fs.w = f.value("w", 0);
        if (fs.h < 1 || fs.w < 1)
          throw InvalidInput(
              "config: downsample features need positive h and w");
      } else if (fs.kind == "eigenfaces" || fs.kind == "laplacianfaces") {
        fs.dim = f.value("dim", 0);
        if (fs.dim < 1)
          throw InvalidInput("config: " + fs.kind +
                             " features need a positive dim");
        if (fs.kind == "laplacianfaces") {
          fs.pca_dim = f.value("pca_dim", 0);
          fs.k = f.value("k", 5);
          fs.t = f.value("t", 0.0);
        }
      } else {
        throw InvalidInput("config: unknown feature kind '" + fs.kind + "'");
      }
      cfg.features.push_back(fs);
    }

    const json* cls = find_key(j, "classifiers");
    if (!cls || !cls->is_array() || cls->empty())
      throw InvalidInput("config: classifiers must be a non-empty array");
    for (const json& c : *cls) {
      ClassifierSpec cs;
      cs.name = c.value("name", std::string());
      cs.robust = c.value("robust", false);
      cs.dim = c.value("dim", 9);
      cfg.classifiers.push_back(cs);
    }

    if (const json* corr = find_key(j, "corruption")) {
      if (!corr->is_array())
        throw InvalidInput("config: corruption must be an array");
      for (const json& c : *corr) {
        CorruptionSpec spec;
        std::string kind = c.value("kind", std::string());
        if (kind == "none") {
          spec.kind = CorruptionKind::kNone;
        } else if (kind == "pixel") {
          spec.kind = CorruptionKind::kPixel;
          spec.fraction = c.value("fraction", -1.0);
        } else if (kind == "block") {
          spec.kind = CorruptionKind::kBlock;
          spec.fraction = c.value("fraction", -1.0);
          spec.occluder = default_occluder();
        } else {
          throw InvalidInput("config: unknown corruption kind '" + kind + "'");
        }
        cfg.corruption.push_back(spec);
      }
    }
    if (cfg.corruption.empty()) cfg.corruption.push_back(CorruptionSpec{});

    cfg.trials = j.value("trials", 1);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.timings = j.value("timings", false);

    validate_config(cfg);
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

namespace {

struct SplitCache {
  FaceDataset train, test;
  std::string error;
};

struct FeatureCache {
  FeatureExtractor extractor;
  LabeledFeatures labeled;  // transformed training vectors with labels
  std::optional<Dictionary> dict;
  std::string fit_error;
  std::string dict_error;
};

FeatureExtractor fit_feature(const FeatureSpec& fs, const FaceDataset& train) {
  if (fs.kind == "downsample")
    return make_downsample(train.h, train.w, fs.h, fs.w);
  std::vector<Eigen::VectorXd> cols;
  cols.reserve(train.size());
  for (const ImageMatrix& img : train.images) cols.push_back(img.as_vector());
  if (fs.kind == "eigenfaces") return eigenfaces_fit(cols, fs.dim);
  return lpp_fit(cols, fs.dim, fs.pca_dim, fs.k, fs.t);
}

int predict(const ClassifierSpec& cs, const FeatureCache& fc,
            const Eigen::VectorXd& y) {
  if (cs.name == "nn") return nn_classify(fc.labeled, y);
  if (cs.name == "ns") return ns_classify(fc.labeled, y, cs.dim).predicted_class;
  const RecoverySolver solver = parse_solver(cs.name);
  const SolverOptions opts;
  const ClassificationResult res =
      cs.robust ? classify_robust(*fc.dict, y, solver, opts)
                : classify(*fc.dict, y, solver, opts);
  return res.predicted_class;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, int threads) {
  validate_config(config);

  ExperimentReport report;
  report.config_json = config_to_json(config).dump();
  report.config_digest = fnv1a_hex(report.config_json);

  const FaceDataset ds =
      config.dataset_path
          ? load_directory(*config.dataset_path)
          : synth_dataset(config.synthetic->classes, config.synthetic->per_class,
                          config.synthetic->h, config.synthetic->w,
                          config.synthetic->subspace_dim,
                          config.synthetic->noise_sigma, config.synthetic->seed);
  const int num_classes = ds.classes();
  report.classes = num_classes;

  // Splits are shared by all cells of a trial so every classifier and feature
  // sees the same train/test partition within that trial.
  std::vector<SplitCache> splits(config.trials);
  for (int t = 0; t < config.trials; ++t) {
    SplitSpec spec = config.split;
    spec.seed = derive_seed(config.split.seed, static_cast<std::uint64_t>(t));
    try {
      auto parts = split_train_test(ds, spec);
      splits[t].train = std::move(parts.first);
      splits[t].test = std::move(parts.second);
    } catch (const std::exception& e) {
      splits[t].error = e.what();
    }
  }

  bool need_dict = false;
  for (const ClassifierSpec& cs : config.classifiers)
    if (solver_backed(cs.name)) need_dict = true;

  const std::size_t num_feats = config.features.size();
  std::vector<FeatureCache> fcache(num_feats * config.trials);
  for (std::size_t fi = 0; fi < num_feats; ++fi) {
    for (int t = 0; t < config.trials; ++t) {
      FeatureCache& fc = fcache[fi * config.trials + t];
      if (!splits[t].error.empty()) {
        fc.fit_error = splits[t].error;
        continue;
      }
      const FaceDataset& train = splits[t].train;
      try {
        fc.extractor = fit_feature(config.features[fi], train);
        fc.labeled.reserve(train.size());
        for (std::size_t i = 0; i < train.size(); ++i)
          fc.labeled.emplace_back(transform(fc.extractor, train.images[i]),
                                  train.labels[i]);
      } catch (const std::exception& e) {
        fc.fit_error = e.what();
        continue;
      }
      if (need_dict) {
        try {
          fc.dict = build_dictionary(fc.labeled);
        } catch (const std::exception& e) {
          fc.dict_error = e.what();
        }
      }
    }
  }

  const std::size_t num_cls = config.classifiers.size();
  const std::size_t num_corr = config.corruption.size();
  const std::size_t num_trials = static_cast<std::size_t>(config.trials);
  report.rows.resize(num_cls * num_feats * num_corr * num_trials);

  auto run_cell = [&](std::size_t idx) {
    std::size_t rest = idx;
    const std::size_t ti = rest % num_trials;
    rest /= num_trials;
    const std::size_t ki = rest % num_corr;
    rest /= num_corr;
    const std::size_t fi = rest % num_feats;
    const std::size_t ci = rest / num_feats;

    const ClassifierSpec& cs = config.classifiers[ci];
    const FeatureSpec& fs = config.features[fi];
    const CorruptionSpec& corr = config.corruption[ki];

    ReportRow& row = report.rows[idx];
    row.classifier = cs.name + (cs.robust ? "+robust" : "");
    row.feature = fs.kind;
    if (fs.kind == "downsample") {
      row.dim_h = fs.h;
      row.dim_w = fs.w;
    } else {
      row.dim_h = fs.dim;
      row.dim_w = 1;
    }
    row.corruption = corruption_name(corr.kind);
    row.fraction = corr.fraction;
    row.trial = static_cast<int>(ti);
    row.confusion.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);

    const auto start = std::chrono::steady_clock::now();
    try {
      const FeatureCache& fc = fcache[fi * num_trials + ti];
      if (!fc.fit_error.empty()) throw InvalidInput(fc.fit_error);
      if (solver_backed(cs.name) && !fc.dict_error.empty())
        throw InvalidInput(fc.dict_error);
      const FaceDataset& test = splits[ti].test;

      std::uint64_t cell_seed = derive_seed(config.seed, ci);
      cell_seed = derive_seed(cell_seed, fi);
      cell_seed = derive_seed(cell_seed, ki);
      cell_seed = derive_seed(cell_seed, ti);

      int correct = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        CorruptionSpec per_image = corr;
        per_image.seed = derive_seed(cell_seed, i);
        const ImageMatrix img = apply_corruption(test.images[i], per_image);
        const Eigen::VectorXd y = transform(fc.extractor, img);
        const int pred = predict(cs, fc, y);
        const int truth = test.labels[i];
        if (pred == truth) ++correct;
        if (truth >= 0 && truth < num_classes && pred >= 0 &&
            pred < num_classes)
          ++row.confusion[static_cast<std::size_t>(truth) * num_classes + pred];
      }
      row.rate = static_cast<double>(correct) / static_cast<double>(test.size());
    } catch (const std::exception& e) {
      row.rate = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
      row.confusion.assign(static_cast<std::size_t>(num_classes) * num_classes,
                           0);
    }
    if (config.timings) {
      const auto stop = std::chrono::steady_clock::now();
      row.wall_ms =
          std::chrono::duration<double, std::milli>(stop - start).count();
    }
  };

  const std::size_t total = report.rows.size();
  const int workers = std::max(1, threads);
  if (workers == 1 || total <= 1) {
    for (std::size_t idx = 0; idx < total; ++idx) run_cell(idx);
  } else {
    std::atomic<std::size_t> next{0};
    auto drain = [&] {
      for (std::size_t idx = next.fetch_add(1); idx < total;
           idx = next.fetch_add(1))
        run_cell(idx);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(drain);
    drain();
    for (std::thread& th : pool) th.join();
  }
  return report;
}

namespace {

std::string emit_csv(const ExperimentReport& report) {
  std::string out =
      "classifier,feature,dim_h,dim_w,corruption,fraction,trial,rate,wall_ms\n";
  char buf[512];
  for (const ReportRow& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%s,%g,%d,%.17g,%.3f\n",
                  row.classifier.c_str(), row.feature.c_str(), row.dim_h,
                  row.dim_w, row.corruption.c_str(), row.fraction, row.trial,
                  row.rate, row.wall_ms);
    out += buf;
  }
  return out;
}

std::string emit_json(const ExperimentReport& report) {
  json j;
  j["version"] = report.version;
  j["config_digest"] = report.config_digest;
  j["classes"] = report.classes;
  j["config"] = report.config_json.empty()
                    ? json(nullptr)
                    : json::parse(report.config_json);
  json rows = json::array();
  for (const ReportRow& row : report.rows) {
    json e;
    e["classifier"] = row.classifier;
    e["feature"] = row.feature;
    e["dim_h"] = row.dim_h;
    e["dim_w"] = row.dim_w;
    e["corruption"] = row.corruption;
    e["fraction"] = row.fraction;
    e["trial"] = row.trial;
    e["rate"] = row.rate;  // NaN serializes as null
    e["wall_ms"] = row.wall_ms;
    e["confusion"] = row.confusion;
    e["error"] = row.error;
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string feature_heading(const ReportRow& row) {
  char buf[128];
  if (row.dim_w == 1)
    std::snprintf(buf, sizeof buf, "%s d=%d", row.feature.c_str(), row.dim_h);
  else
    std::snprintf(buf, sizeof buf, "%s %dx%d", row.feature.c_str(), row.dim_h,
                  row.dim_w);
  return buf;
}

std::string corruption_heading(const ReportRow& row) {
  if (row.corruption == "none") return "none";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s %g%%", row.corruption.c_str(),
                row.fraction * 100.0);
  return buf;
}

std::string emit_markdown(const ExperimentReport& report) {
  std::string out = "# Recognition rates (%)\n";

  std::vector<std::string> groups;
  for (const ReportRow& row : report.rows) {
    const std::string g = feature_heading(row);
    if (std::find(groups.begin(), groups.end(), g) == groups.end())
      groups.push_back(g);
  }

  for (const std::string& group : groups) {
    std::vector<std::string> methods, levels;
    for (const ReportRow& row : report.rows) {
      if (feature_heading(row) != group) continue;
      if (std::find(methods.begin(), methods.end(), row.classifier) ==
          methods.end())
        methods.push_back(row.classifier);
      const std::string level = corruption_heading(row);
      if (std::find(levels.begin(), levels.end(), level) == levels.end())
        levels.push_back(level);
    }

    out += "\n## " + group + "\n\n";
    out += "| classifier |";
    for (const std::string& level : levels) out += " " + level + " |";
    out += "\n| --- |";
    for (std::size_t i = 0; i < levels.size(); ++i) out += " ---: |";
    out += "\n";

    for (const std::string& method : methods) {
      out += "| " + method + " |";
      for (const std::string& level : levels) {
        double sum = 0.0;
        int count = 0;
        for (const ReportRow& row : report.rows) {
          if (feature_heading(row) != group || row.classifier != method ||
              corruption_heading(row) != level || std::isnan(row.rate))
            continue;
          sum += row.rate;
          ++count;
        }
        if (count == 0) {
          out += " n/a |";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof buf, " %.2f |", 100.0 * sum / count);
          out += buf;
        }
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace

std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kCsv: return emit_csv(report);
    case ReportFormat::kJson: return emit_json(report);
    case ReportFormat::kMarkdown: return emit_markdown(report);
  }
  throw InvalidInput("emit_report: unknown format");
}

void write_report(const ExperimentReport& report, ReportFormat format,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_report: cannot open " + path);
  out << emit_report(report, format);
  if (!out) throw IoError("emit_report: write failed for " + path);
}

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw InvalidInput("format must be csv, json, or markdown");
}

}  // namespace bsr
