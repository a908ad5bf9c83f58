#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bsr/baselines.hpp"
#include "bsr/bench.hpp"
#include "bsr/bsbl.hpp"
#include "bsr/classifier.hpp"
#include "bsr/data_io.hpp"
#include "bsr/errors.hpp"
#include "bsr/features.hpp"
#include "bsr/oracle.hpp"
#include "bsr/rng.hpp"

namespace {

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bsr::IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw bsr::IoError(path + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw bsr::IoError(path + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw bsr::IoError(path + ": no data");
  Eigen::MatrixXd mat(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return mat;
}

Eigen::VectorXd read_csv_vector(const std::string& path) {
  const Eigen::MatrixXd mat = read_csv_matrix(path);
  if (mat.cols() == 1) return mat.col(0);
  if (mat.rows() == 1) return mat.row(0).transpose();
  throw bsr::IoError(path + ": expected a single row or column");
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw bsr::InvalidInput("bad integer list entry '" + cell + "'");
    }
  }
  if (out.empty()) throw bsr::InvalidInput("empty integer list");
  return out;
}

int run_bench(const std::string& config_path, const std::string& out,
              const std::string& format, bool has_seed, std::uint64_t seed,
              int threads, bool timings) {
  bsr::ExperimentConfig cfg = bsr::load_config(config_path);
  if (has_seed) cfg.seed = seed;
  if (timings) cfg.timings = true;
  const bsr::ReportFormat fmt = bsr::parse_format(format);
  const bsr::ExperimentReport report = bsr::run_experiment(cfg, threads);
  int errors = 0;
  for (const bsr::ReportRow& row : report.rows)
    if (!row.error.empty()) ++errors;
  if (out.empty()) {
    std::cout << bsr::emit_report(report, fmt);
  } else {
    bsr::write_report(report, fmt, out);
    std::cout << "wrote " << out << " (" << report.rows.size() << " rows, "
              << errors << " failed cells)\n";
  }
  for (const bsr::ReportRow& row : report.rows)
    if (!row.error.empty())
      std::cerr << "cell " << row.classifier << "/" << row.feature << "/"
                << row.corruption << "/trial " << row.trial << ": " << row.error
                << "\n";
  return 0;
}

int run_recover(const std::string& matrix_path, const std::string& rhs_path,
                const std::string& blocks, const std::string& solver,
                double epsilon, int max_iters, const std::string& out) {
  const Eigen::MatrixXd phi = read_csv_matrix(matrix_path);
  const Eigen::VectorXd y = read_csv_vector(rhs_path);
  const bsr::BlockPartition partition(parse_int_list(blocks));
  const bsr::SensingProblem problem(phi, y, partition);
  bsr::SolverOptions opts;
  opts.epsilon = epsilon;
  opts.max_iters = max_iters;

  const bsr::RecoverySolver kind = bsr::parse_solver(solver);
  bsr::SolverResult result;
  switch (kind) {
    case bsr::RecoverySolver::kBsbl: result = bsr::bsbl_solve(problem, opts); break;
    case bsr::RecoverySolver::kL1: result = bsr::l1_solve(problem, opts); break;
    case bsr::RecoverySolver::kBlockL1:
      result = bsr::block_l1_solve(problem, opts);
      break;
  }

  std::vector<double> norms(static_cast<std::size_t>(partition.blocks()));
  double max_norm = 0.0;
  for (int i = 0; i < partition.blocks(); ++i) {
    norms[static_cast<std::size_t>(i)] =
        result.x_hat.segment(partition.offset(i), partition.size(i)).norm();
    max_norm = std::max(max_norm, norms[static_cast<std::size_t>(i)]);
  }

  std::cout << "solver: " << bsr::solver_name(kind) << "\n"
            << "system: " << problem.m() << " x " << problem.n() << ", "
            << partition.blocks() << " blocks\n"
            << "iterations: " << result.iterations
            << (result.converged ? " (converged)" : " (iteration limit)") << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", result.final_cost);
  std::cout << "final cost: " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.6g",
                (y - phi * result.x_hat).norm());
  std::cout << "residual norm: " << buf << "\n";

  // Support blocks carry at least 0.1% of the largest block norm.
  std::cout << "support: {";
  bool first = true;
  for (int i = 0; i < partition.blocks(); ++i) {
    if (max_norm == 0.0 || norms[static_cast<std::size_t>(i)] <= 1e-3 * max_norm)
      continue;
    if (!first) std::cout << ", ";
    std::cout << i;
    first = false;
  }
  std::cout << "}\n";
  std::cout << "block norms: [";
  for (int i = 0; i < partition.blocks(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", norms[static_cast<std::size_t>(i)]);
    std::cout << (i ? ", " : "") << buf;
  }
  std::cout << "]\n";

  if (!out.empty()) {
    std::ofstream xs(out);
    if (!xs) throw bsr::IoError("cannot open " + out);
    for (Eigen::Index i = 0; i < result.x_hat.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", result.x_hat(i));
      xs << buf << "\n";
    }
    std::cout << "wrote coefficients to " << out << "\n";
  }
  return 0;
}

int run_classify(const std::string& train_dir, const std::string& image_path,
                 const std::string& solver, bool robust,
                 const std::string& downsample_spec) {
  const bsr::FaceDataset ds = bsr::load_directory(train_dir);
  const bsr::ImageMatrix img = bsr::load_image(image_path);
  if (img.height() != ds.h || img.width() != ds.w)
    throw bsr::InvalidInput("image is " + std::to_string(img.height()) + "x" +
                            std::to_string(img.width()) + " but training data is " +
                            std::to_string(ds.h) + "x" + std::to_string(ds.w));

  bsr::FeatureExtractor ex;
  if (downsample_spec.empty()) {
    ex = bsr::make_downsample(ds.h, ds.w, ds.h, ds.w);
  } else {
    const std::size_t sep = downsample_spec.find('x');
    if (sep == std::string::npos)
      throw bsr::InvalidInput("--downsample expects HxW, e.g. 12x10");
    const std::vector<int> hs = parse_int_list(downsample_spec.substr(0, sep));
    const std::vector<int> ws = parse_int_list(downsample_spec.substr(sep + 1));
    if (hs.size() != 1 || ws.size() != 1)
      throw bsr::InvalidInput("--downsample expects HxW, e.g. 12x10");
    ex = bsr::make_downsample(ds.h, ds.w, hs[0], ws[0]);
  }

  bsr::LabeledFeatures feats;
  feats.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    feats.emplace_back(bsr::transform(ex, ds.images[i]), ds.labels[i]);
  const bsr::Dictionary dict = bsr::build_dictionary(feats);
  const Eigen::VectorXd y = bsr::transform(ex, img);

  const bsr::RecoverySolver kind = bsr::parse_solver(solver);
  const bsr::ClassificationResult res =
      robust ? bsr::classify_robust(dict, y, kind)
             : bsr::classify(dict, y, kind);

  std::cout << "predicted: " << ds.class_names[static_cast<std::size_t>(
                   res.predicted_class)]
            << " (class " << res.predicted_class << ")\n"
            << "solver: " << res.solver_name << (robust ? " robust" : "") << "\n"
            << "residuals:\n";
  char buf[64];
  for (int j = 0; j < dict.classes(); ++j) {
    std::snprintf(buf, sizeof buf, "%.6g", res.residuals(j));
    std::cout << "  " << ds.class_names[static_cast<std::size_t>(dict.class_ids[
                     static_cast<std::size_t>(j)])]
              << ": " << buf << "\n";
  }
  return 0;
}

int run_synth(const std::string& out, int classes, int per_class, int height,
              int width, int dim, double sigma, std::uint64_t seed,
              const std::string& format) {
  bsr::FileFormat fmt;
  if (format == "pgm")
    fmt = bsr::FileFormat::kPgm;
  else if (format == "csv")
    fmt = bsr::FileFormat::kCsv;
  else
    throw bsr::InvalidInput("--format must be pgm or csv");
  const bsr::FaceDataset ds =
      bsr::synth_dataset(classes, per_class, height, width, dim, sigma, seed);
  bsr::save_dataset(ds, out, fmt);
  std::cout << "wrote " << ds.size() << " images (" << classes << " classes, "
            << height << "x" << width << ") to " << out << "\n";
  return 0;
}

bool check(const char* name, bool ok) {
  std::cout << "selftest " << name << ": " << (ok ? "PASS" : "FAIL") << "\n";
  return ok;
}

int run_selftest() {
  bool all = true;

  {
    Eigen::MatrixXd px(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) px(i, j) = ((i + j) % 2) ? 255.0 : 0.0;
    const Eigen::VectorXd pooled =
        bsr::downsample(bsr::ImageMatrix(px), 2, 2);
    all &= check("pooling", (pooled.array() == 127.5).all());
  }

  {
    bsr::SplitMix64 a(7), b(7);
    bool same = true;
    for (int i = 0; i < 8; ++i) same &= a.next_u64() == b.next_u64();
    all &= check("rng", same && bsr::derive_seed(1, 2) != bsr::derive_seed(1, 3));
  }

  {
    bsr::SplitMix64 rng(11);
    Eigen::MatrixXd phi(10, 16);
    for (Eigen::Index i = 0; i < phi.rows(); ++i)
      for (Eigen::Index j = 0; j < phi.cols(); ++j) phi(i, j) = rng.next_normal();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(16);
    for (int i = 0; i < 4; ++i) x0(8 + i) = rng.next_normal();
    const bsr::SensingProblem problem(phi, phi * x0,
                                      bsr::BlockPartition::uniform(4, 4));
    const bsr::SolverResult res = bsr::bsbl_solve(problem);
    const double nmse = (res.x_hat - x0).norm() / x0.norm();
    int best = 0;
    double best_norm = -1.0;
    for (int i = 0; i < 4; ++i) {
      const double n = res.x_hat.segment(4 * i, 4).norm();
      if (n > best_norm) {
        best_norm = n;
        best = i;
      }
    }
    all &= check("recovery", nmse < 1e-3 && best == 2);
  }

  {
    bool agree = true;
    for (std::uint64_t seed = 21; seed < 24; ++seed) {
      bsr::SplitMix64 rng(seed);
      Eigen::MatrixXd phi(10, 16);
      for (Eigen::Index i = 0; i < phi.rows(); ++i)
        for (Eigen::Index j = 0; j < phi.cols(); ++j) phi(i, j) = rng.next_normal();
      Eigen::VectorXd x0 = Eigen::VectorXd::Zero(16);
      const int active = static_cast<int>(rng.next_below(4));
      for (int i = 0; i < 4; ++i) x0(4 * active + i) = rng.next_normal();
      const bsr::SensingProblem problem(phi, phi * x0,
                                        bsr::BlockPartition::uniform(4, 4));
      const Eigen::VectorXd exhaustive = bsr::brute_force_oracle(problem, 1);
      const Eigen::VectorXd learned = bsr::bsbl_solve(problem).x_hat;
      agree &= (learned - exhaustive).norm() <= 1e-3 * exhaustive.norm();
    }
    all &= check("oracle", agree);
  }

  {
    const bsr::FaceDataset ds = bsr::synth_dataset(3, 8, 16, 16, 3, 1.0, 501);
    bsr::SplitSpec spec;
    spec.ratio = 0.5;
    spec.seed = 7;
    const auto parts = bsr::split_train_test(ds, spec);
    bsr::LabeledFeatures train;
    for (std::size_t i = 0; i < parts.first.size(); ++i)
      train.emplace_back(parts.first.images[i].as_vector(),
                         parts.first.labels[i]);
    int correct = 0;
    for (std::size_t i = 0; i < parts.second.size(); ++i)
      if (bsr::nn_classify(train, parts.second.images[i].as_vector()) ==
          parts.second.labels[i])
        ++correct;
    all &= check("classifier",
                 correct >= static_cast<int>(parts.second.size()) - 2);
  }

  {
    bsr::ExperimentConfig cfg;
    bsr::SyntheticSpec synth;
    synth.classes = 3;
    synth.per_class = 8;
    synth.h = 16;
    synth.w = 16;
    synth.subspace_dim = 3;
    synth.noise_sigma = 1.0;
    synth.seed = 501;
    cfg.synthetic = synth;
    cfg.split.seed = 7;
    cfg.features.push_back({"downsample", 8, 8, 0, 0, 5, 0.0});
    cfg.classifiers.push_back({"nn", false, 9});
    cfg.corruption.push_back({});
    const bsr::ExperimentReport report = bsr::run_experiment(cfg);
    const std::string csv = bsr::emit_report(report, bsr::ReportFormat::kCsv);
    all &= check("report", report.rows.size() == 1 &&
                               report.rows[0].error.empty() &&
                               std::isfinite(report.rows[0].rate) &&
                               csv.find("nn,downsample,8,8,none") !=
                                   std::string::npos);
  }

  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-sparse recovery and recognition toolkit"};
  app.require_subcommand(1);

  // bench
  std::string bench_config, bench_out, bench_format = "csv";
  std::uint64_t bench_seed = 0;
  int bench_threads = 1;
  bool bench_timings = false;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark grid from a config file");
  bench->add_option("config", bench_config, "JSON experiment config")->required();
  bench->add_option("--out", bench_out, "Output file (default: stdout)");
  bench->add_option("--format", bench_format, "csv, json, or markdown");
  CLI::Option* seed_opt =
      bench->add_option("--seed", bench_seed, "Override the config master seed");
  bench->add_option("--threads", bench_threads, "Worker threads for grid cells");
  bench->add_flag("--timings", bench_timings, "Record wall-clock times per cell");

  // recover
  std::string rec_matrix, rec_rhs, rec_blocks, rec_solver = "bsbl", rec_out;
  double rec_epsilon = 0.0;
  int rec_max_iters = 300;
  CLI::App* recover = app.add_subcommand("recover", "Solve one block-sparse system");
  recover->add_option("--matrix", rec_matrix, "CSV sensing matrix")->required();
  recover->add_option("--rhs", rec_rhs, "CSV measurement vector")->required();
  recover->add_option("--blocks", rec_blocks, "Comma-separated block sizes")->required();
  recover->add_option("--solver", rec_solver, "bsbl, l1, or block_l1");
  recover->add_option("--epsilon", rec_epsilon, "Noise tolerance for the baselines");
  recover->add_option("--max-iters", rec_max_iters, "Iteration limit");
  recover->add_option("--out", rec_out, "Write recovered coefficients to this CSV");

  // classify
  std::string cls_train, cls_image, cls_solver = "bsbl", cls_down;
  bool cls_robust = false;
  CLI::App* classify = app.add_subcommand("classify", "Classify one image against a training directory");
  classify->add_option("--train", cls_train, "Training dataset directory")->required();
  classify->add_option("--image", cls_image, "Image to classify (.pgm or .csv)")->required();
  classify->add_option("--solver", cls_solver, "bsbl, l1, or block_l1");
  classify->add_flag("--robust", cls_robust, "Absorb per-pixel outliers via [Phi, I]");
  classify->add_option("--downsample", cls_down, "Feature grid HxW (default: raw pixels)");

  // synth
  std::string syn_out, syn_format = "pgm";
  int syn_classes = 5, syn_per_class = 10, syn_h = 24, syn_w = 21, syn_dim = 4;
  double syn_sigma = 2.0;
  std::uint64_t syn_seed = 1;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  synth->add_option("--out", syn_out, "Output directory")->required();
  synth->add_option("--classes", syn_classes, "Number of classes");
  synth->add_option("--per-class", syn_per_class, "Images per class");
  synth->add_option("--height", syn_h, "Image height");
  synth->add_option("--width", syn_w, "Image width");
  synth->add_option("--dim", syn_dim, "Class subspace dimension");
  synth->add_option("--sigma", syn_sigma, "Latent noise sigma");
  synth->add_option("--seed", syn_seed, "Generator seed");
  synth->add_option("--format", syn_format, "pgm or csv");

  CLI::App* selftest = app.add_subcommand("selftest", "Run quick built-in checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (bench->parsed())
      return run_bench(bench_config, bench_out, bench_format,
                       seed_opt->count() > 0, bench_seed, bench_threads,
                       bench_timings);
    if (recover->parsed())
      return run_recover(rec_matrix, rec_rhs, rec_blocks, rec_solver,
                         rec_epsilon, rec_max_iters, rec_out);
    if (classify->parsed())
      return run_classify(cls_train, cls_image, cls_solver, cls_robust,
                          cls_down);
    if (synth->parsed())
      return run_synth(syn_out, syn_classes, syn_per_class, syn_h, syn_w,
                       syn_dim, syn_sigma, syn_seed, syn_format);
    if (selftest->parsed()) return run_selftest();
  } catch (const bsr::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
