#include "bsr/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "bsr/features.hpp"
#include "bsr/rng.hpp"

namespace fs = std::filesystem;

namespace bsr {

namespace {

int parse_int_strict(const std::string& tok, const std::string& context) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(context + ": bad integer '" + tok + "'");
  }
}

/// Next header token of a PGM stream, skipping whitespace and # comments.
std::string pgm_token(std::istream& in, const std::string& path) {
  int c = in.get();
  for (;;) {
    if (c == EOF) throw IoError("pgm header truncated: " + path);
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (!std::isspace(c)) break;
    c = in.get();
  }
  std::string tok;
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == EOF) throw IoError("pgm header truncated: " + path);
  return tok;
}

ImageMatrix load_pgm(const fs::path& p) {
  const std::string path = p.string();
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const int m0 = in.get(), m1 = in.get();
  if (m0 != 'P' || m1 != '5')
    throw IoError("not a binary P5 file: " + path);
  const int w = parse_int_strict(pgm_token(in, path), path);
  const int h = parse_int_strict(pgm_token(in, path), path);
  const int maxval = parse_int_strict(pgm_token(in, path), path);
  if (w < 1 || h < 1) throw IoError("pgm has empty dimensions: " + path);
  if (maxval != 255) throw IoError("pgm maxval must be 255: " + path);

  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw IoError("pgm pixel data truncated: " + path);

  Eigen::MatrixXd px(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      px(i, j) = buf[static_cast<std::size_t>(i) * w + j];
  return ImageMatrix(std::move(px));
}

ImageMatrix load_csv(const fs::path& p) {
  const std::string path = p.string();
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto a = cell.find_first_not_of(" \t");
      const auto b = cell.find_last_not_of(" \t");
      if (a == std::string::npos) throw IoError("csv has an empty cell: " + path);
      const int v = parse_int_strict(cell.substr(a, b - a + 1), path);
      if (v < 0 || v > 255)
        throw IoError("csv value out of [0, 255]: " + path);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("csv has ragged rows: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw IoError("csv is empty: " + path);

  Eigen::MatrixXd px(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      px(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return ImageMatrix(std::move(px));
}

int quantize(double v) {
  const long r = std::lround(v);
  return static_cast<int>(std::clamp(r, 0L, 255L));
}

void save_pgm(const ImageMatrix& img, const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j)
      out.put(static_cast<char>(static_cast<unsigned char>(quantize(img.pixels(i, j)))));
  if (!out) throw IoError("write failed: " + p.string());
}

void save_csv(const ImageMatrix& img, const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  for (int i = 0; i < img.height(); ++i) {
    for (int j = 0; j < img.width(); ++j) {
      if (j) out << ',';
      out << quantize(img.pixels(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + p.string());
}

std::string lowercase_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

/// Nearest-neighbor resize used when the occluder is smaller than the block.
Eigen::MatrixXd nearest_resize(const Eigen::MatrixXd& src, int s) {
  const int oh = static_cast<int>(src.rows());
  const int ow = static_cast<int>(src.cols());
  Eigen::MatrixXd out(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) out(i, j) = src(i * oh / s, j * ow / s);
  return out;
}

}  // namespace

void CorruptionSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 0.9))
    throw InvalidInput("CorruptionSpec: fraction must lie in [0, 0.9]");
  if (kind == CorruptionKind::kBlock && !occluder.has_value())
    throw InvalidInput("CorruptionSpec: block corruption needs an occluder");
}

ImageMatrix load_image(const std::string& path) {
  const fs::path p(path);
  if (!fs::is_regular_file(p)) throw IoError("not a file: " + path);
  const std::string ext = lowercase_extension(p);
  if (ext == ".pgm") return load_pgm(p);
  if (ext == ".csv") return load_csv(p);
  throw IoError("unsupported image format: " + path);
}

FaceDataset load_directory(const std::string& root) {
  const fs::path rootp(root);
  if (!fs::is_directory(rootp)) throw IoError("not a directory: " + root);

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(rootp))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());

  FaceDataset ds;
  ds.source = root;
  std::vector<std::string> offenders;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    if (files.empty()) {
      ++ds.skipped_dirs;
      continue;
    }
    std::sort(files.begin(), files.end());

    const int label = static_cast<int>(ds.class_names.size());
    ds.class_names.push_back(dir.filename().string());
    for (const auto& file : files) {
      const std::string ext = lowercase_extension(file);
      ImageMatrix img = ext == ".pgm"   ? load_pgm(file)
                        : ext == ".csv" ? load_csv(file)
                                        : throw IoError("unsupported image format: " +
                                                        file.string());
      if (ds.images.empty()) {
        ds.h = img.height();
        ds.w = img.width();
      }
      if (img.height() != ds.h || img.width() != ds.w) {
        offenders.push_back(file.string() + " (" + std::to_string(img.height()) +
                            "x" + std::to_string(img.width()) + ")");
        continue;
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(label);
      ds.paths.push_back(dir.filename().string() + "/" + file.filename().string());
    }
  }
  if (!offenders.empty()) {
    std::string msg = "mixed image dimensions, expected " + std::to_string(ds.h) +
                      "x" + std::to_string(ds.w) + ":";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw IoError(msg);
  }
  if (ds.images.empty()) throw IoError("no images found under " + root);
  return ds;
}

void save_dataset(const FaceDataset& ds, const std::string& root, FileFormat format) {
  if (ds.images.size() != ds.labels.size() || ds.images.empty())
    throw InvalidInput("save_dataset: empty or inconsistent dataset");
  const fs::path rootp(root);
  fs::create_directories(rootp);

  auto class_name = [&](int label) {
    if (label >= 0 && label < static_cast<int>(ds.class_names.size()))
      return ds.class_names[static_cast<std::size_t>(label)];
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%03d", label);
    return std::string(buf);
  };

  std::map<int, int> counters;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const int label = ds.labels[i];
    const fs::path dir = rootp / class_name(label);
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof name, "img_%04d", counters[label]++);
    const fs::path file =
        dir / (std::string(name) + (format == FileFormat::kPgm ? ".pgm" : ".csv"));
    if (format == FileFormat::kPgm)
      save_pgm(ds.images[i], file);
    else
      save_csv(ds.images[i], file);
  }
}

FaceDataset synth_dataset(int classes, int per_class, int h, int w,
                          int subspace_dim, double noise_sigma,
                          std::uint64_t seed) {
  if (classes < 1 || per_class < 1 || h < 1 || w < 1)
    throw InvalidInput("synth_dataset: counts and dimensions must be positive");
  const int dim = h * w;
  if (subspace_dim < 0 || subspace_dim > dim)
    throw InvalidInput("synth_dataset: subspace_dim must lie in [0, h*w]");
  if (!(noise_sigma >= 0.0))
    throw InvalidInput("synth_dataset: noise_sigma must be non-negative");

  FaceDataset ds;
  ds.h = h;
  ds.w = w;
  {
    std::ostringstream src;
    src << "synthetic classes=" << classes << " per_class=" << per_class
        << " dims=" << h << "x" << w << " subspace_dim=" << subspace_dim
        << " sigma=" << noise_sigma << " seed=" << seed;
    ds.source = src.str();
  }

  for (int c = 0; c < classes; ++c) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    Eigen::VectorXd base(dim);
    for (int i = 0; i < dim; ++i) base[i] = 3.0 * rng.next_normal();
    Eigen::MatrixXd basis(dim, subspace_dim);
    const double col_scale =
        subspace_dim > 0 ? 1.0 / std::sqrt(static_cast<double>(subspace_dim)) : 0.0;
    for (int k = 0; k < subspace_dim; ++k)
      for (int i = 0; i < dim; ++i) basis(i, k) = col_scale * rng.next_normal();

    std::vector<Eigen::VectorXd> raws;
    for (int j = 0; j < per_class; ++j) {
      Eigen::VectorXd v = base;
      if (subspace_dim > 0) {
        Eigen::VectorXd coef(subspace_dim);
        for (int k = 0; k < subspace_dim; ++k) coef[k] = rng.next_normal();
        v += basis * coef;
      }
      for (int i = 0; i < dim; ++i) v[i] += noise_sigma * rng.next_normal();
      raws.push_back(std::move(v));
    }

    // One affine map per class onto [0, 255], so within-class affine
    // relations between images survive the rescaling.
    double lo = raws.front().minCoeff(), hi = raws.front().maxCoeff();
    for (const auto& v : raws) {
      lo = std::min(lo, v.minCoeff());
      hi = std::max(hi, v.maxCoeff());
    }
    for (auto& v : raws) {
      if (hi > lo)
        v = (v.array() - lo) * (255.0 / (hi - lo));
      else
        v.setConstant(127.5);
      Eigen::MatrixXd px(h, w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) px(i, j) = v[i * w + j];
      ds.images.emplace_back(std::move(px));
      ds.labels.push_back(c);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%03d", c);
    ds.class_names.emplace_back(buf);
  }
  return ds;
}

PixelCorruption corrupt_pixels(const ImageMatrix& img, double fraction,
                               std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 0.9))
    throw InvalidInput("corrupt_pixels: fraction must lie in [0, 0.9]");
  const int h = img.height(), w = img.width();
  const int total = h * w;
  const int count = static_cast<int>(std::floor(fraction * total + 0.5));

  SplitMix64 rng(seed);
  std::vector<int> positions = rng.sample_without_replacement(total, count);
  Eigen::MatrixXd px = img.pixels;
  for (int pos : positions)
    px(pos / w, pos % w) = static_cast<double>(rng.next_below(256));
  return PixelCorruption{ImageMatrix(std::move(px)), std::move(positions)};
}

BlockOcclusion occlude_block(const ImageMatrix& img, double fraction,
                             const ImageMatrix& occluder, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidInput("occlude_block: fraction must lie in [0, 1]");
  const int h = img.height(), w = img.width();
  int side = static_cast<int>(std::floor(std::sqrt(fraction * h * w) + 0.5));
  side = std::min(side, std::min(h, w));
  if (side == 0) return BlockOcclusion{img, 0, 0, 0};

  SplitMix64 rng(seed);
  const int top = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(h - side + 1)));
  const int left = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w - side + 1)));

  Eigen::MatrixXd patch;
  if (occluder.height() >= side && occluder.width() >= side) {
    const Eigen::VectorXd v = downsample(occluder, side, side);
    patch.resize(side, side);
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) patch(i, j) = v[i * side + j];
  } else {
    patch = nearest_resize(occluder.pixels, side);
  }

  Eigen::MatrixXd px = img.pixels;
  px.block(top, left, side, side) = patch;
  return BlockOcclusion{ImageMatrix(std::move(px)), top, left, side};
}

ImageMatrix default_occluder() {
  Eigen::MatrixXd px(32, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      px(i, j) = ((i + j) % 2 ? 30.0 : 200.0) + 25.0 * (i + j - 31) / 31.0;
  return ImageMatrix(std::move(px));
}

ImageMatrix apply_corruption(const ImageMatrix& img, const CorruptionSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case CorruptionKind::kNone:
      return img;
    case CorruptionKind::kPixel:
      return corrupt_pixels(img, spec.fraction, spec.seed).image;
    case CorruptionKind::kBlock:
      return occlude_block(img, spec.fraction, *spec.occluder, spec.seed).image;
  }
  throw InvalidInput("apply_corruption: unknown corruption kind");
}

namespace {

/// Reads the manifest and marks every listed image as training. Entries are
/// `class/file` relative paths; blank lines and `#` comments are skipped.
std::vector<char> manifest_train_mask(const FaceDataset& ds,
                                      const std::string& manifest) {
  if (manifest.empty())
    throw InvalidInput("split_train_test: manifest mode needs a file path");
  if (ds.paths.size() != ds.images.size())
    throw InvalidInput(
        "split_train_test: dataset records no file paths; manifest mode needs "
        "a directory-loaded dataset");
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest: " + manifest);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.paths.size(); ++i) index.emplace(ds.paths[i], i);

  std::vector<char> mask(ds.paths.size(), 0);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const std::size_t last = line.find_last_not_of(" \t\r");
    const std::string entry = line.substr(first, last - first + 1);
    if (entry[0] == '#') continue;
    const auto it = index.find(entry);
    if (it == index.end())
      throw InvalidInput("split_train_test: manifest entry not in dataset: " + entry);
    if (mask[it->second])
      throw InvalidInput("split_train_test: duplicate manifest entry: " + entry);
    mask[it->second] = 1;
  }
  return mask;
}

}  // namespace

std::pair<FaceDataset, FaceDataset> split_train_test(const FaceDataset& ds,
                                                     const SplitSpec& spec) {
  if (ds.images.empty() || ds.images.size() != ds.labels.size())
    throw InvalidInput("split_train_test: empty or inconsistent dataset");
  if (spec.mode == SplitMode::kPerClassRatio && !(spec.ratio > 0.0 && spec.ratio < 1.0))
    throw InvalidInput("split_train_test: ratio must lie in (0, 1)");
  if (spec.mode == SplitMode::kPerClassCount && spec.count < 1)
    throw InvalidInput("split_train_test: count must be at least 1");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(i);

  auto class_name = [&](int label) {
    if (label >= 0 && label < static_cast<int>(ds.class_names.size()))
      return ds.class_names[static_cast<std::size_t>(label)];
    return "label " + std::to_string(label);
  };

  std::vector<char> manifest_mask;
  if (spec.mode == SplitMode::kManifest)
    manifest_mask = manifest_train_mask(ds, spec.manifest);

  FaceDataset train, test;
  for (FaceDataset* part : {&train, &test}) {
    part->h = ds.h;
    part->w = ds.w;
    part->source = ds.source;
    part->class_names = ds.class_names;
  }

  const bool has_paths = ds.paths.size() == ds.images.size();
  for (const auto& [label, members] : by_class) {
    const int n = static_cast<int>(members.size());
    std::vector<char> is_train(static_cast<std::size_t>(n), 0);
    if (spec.mode == SplitMode::kManifest) {
      int n_train = 0;
      for (int i = 0; i < n; ++i) {
        is_train[static_cast<std::size_t>(i)] =
            manifest_mask[members[static_cast<std::size_t>(i)]];
        n_train += is_train[static_cast<std::size_t>(i)];
      }
      if (n_train < 1 || n_train >= n)
        throw InvalidInput("split_train_test: manifest leaves class " +
                           class_name(label) + " without a " +
                           (n_train < 1 ? std::string("training") : std::string("test")) +
                           " image");
    } else {
      const int n_train =
          spec.mode == SplitMode::kPerClassRatio
              ? static_cast<int>(std::floor(spec.ratio * n + 0.5))
              : spec.count;
      if (n_train < 1 || n_train >= n)
        throw InvalidInput("split_train_test: class " + class_name(label) + " with " +
                           std::to_string(n) + " images cannot supply " +
                           std::to_string(n_train) + " training images and a test set");

      SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(label)));
      std::vector<int> picked = rng.sample_without_replacement(n, n_train);
      for (int p : picked) is_train[static_cast<std::size_t>(p)] = 1;
    }

    for (int i = 0; i < n; ++i) {
      const std::size_t src = members[static_cast<std::size_t>(i)];
      FaceDataset& part = is_train[static_cast<std::size_t>(i)] ? train : test;
      part.images.push_back(ds.images[src]);
      part.labels.push_back(label);
      if (has_paths) part.paths.push_back(ds.paths[src]);
    }
  }
  return {train, test};
}

}  // namespace bsr
