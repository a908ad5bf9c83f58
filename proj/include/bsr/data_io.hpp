#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bsr/errors.hpp"
#include "bsr/image.hpp"

namespace bsr {

/// A labeled image collection with uniform dimensions. Labels are dense ids
/// 0..K-1 in the lexicographic order of class_names. Directory-loaded
/// datasets record each image's `class/file` relative path in paths;
/// synthetic datasets leave paths empty.
struct FaceDataset {
  std::vector<ImageMatrix> images;
  std::vector<int> labels;
  int h = 0, w = 0;
  std::string source;
  std::vector<std::string> class_names;
  std::vector<std::string> paths;
  int skipped_dirs = 0;  // empty class directories ignored during load

  int classes() const { return static_cast<int>(class_names.size()); }
  std::size_t size() const { return images.size(); }
};

enum class CorruptionKind { kNone, kPixel, kBlock };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kNone;
  double fraction = 0.0;  // in [0, 0.9]
  std::uint64_t seed = 0;
  std::optional<ImageMatrix> occluder;  // required for the block kind

  void validate() const;
};

enum class SplitMode { kPerClassRatio, kPerClassCount, kManifest };

struct SplitSpec {
  SplitMode mode = SplitMode::kPerClassRatio;
  double ratio = 0.5;     // per_class_ratio: training share, in (0, 1)
  int count = 0;          // per_class_count: training images per class
  std::string manifest;   // manifest: file listing the training images
  std::uint64_t seed = 0;
};

enum class FileFormat { kPgm, kCsv };

/// Loads one image, dispatching on the file extension (.pgm or .csv).
ImageMatrix load_image(const std::string& path);

/// Loads `<root>/<class_name>/<image file>` with classes ordered by name and
/// files ordered by name within each class. Supported formats: binary PGM
/// (P5, maxval 255) and headerless CSV integer matrices. Empty class
/// directories are skipped and counted in the result.
FaceDataset load_directory(const std::string& root);

/// Writes the dataset in the load_directory layout, quantizing pixels to the
/// nearest integer in [0, 255]. Integer-valued datasets round-trip exactly.
void save_dataset(const FaceDataset& ds, const std::string& root,
                  FileFormat format = FileFormat::kPgm);

/// Seed-determined synthetic dataset: each class draws images from its own
/// random affine subspace of the given dimension, with unit Gaussian
/// coefficients and isotropic noise of the given sigma in the latent scale,
/// then maps the class's value range affinely onto [0, 255].
FaceDataset synth_dataset(int classes, int per_class, int h, int w,
                          int subspace_dim, double noise_sigma,
                          std::uint64_t seed);

struct PixelCorruption {
  ImageMatrix image;
  std::vector<int> positions;  // row-major indices of resampled pixels
};

/// Replaces round(fraction * h * w) distinct pixels, chosen without
/// replacement by the seeded generator, with independent uniform gray values
/// in {0, ..., 255}. The resampled positions are reported in sampling order.
PixelCorruption corrupt_pixels(const ImageMatrix& img, double fraction,
                               std::uint64_t seed);

struct BlockOcclusion {
  ImageMatrix image;
  int top = 0, left = 0, side = 0;  // replaced square, empty when side == 0
};

/// Replaces a square block of side round(sqrt(fraction * h * w)), clamped to
/// min(h, w), at a seeded uniform position with the occluder resized to the
/// block size (area-average when shrinking, nearest-neighbor when growing).
BlockOcclusion occlude_block(const ImageMatrix& img, double fraction,
                             const ImageMatrix& occluder, std::uint64_t seed);

/// Deterministic 32x32 high-frequency checkerboard with a diagonal gradient,
/// used as the stand-in occluder image.
ImageMatrix default_occluder();

/// Dispatches on spec.kind; the seed inside the spec drives the operation.
ImageMatrix apply_corruption(const ImageMatrix& img, const CorruptionSpec& spec);

/// Splits the dataset into train and test parts, preserving image order
/// within each part. Ratio and count modes partition every class
/// independently with a seeded stream derived from (seed, label). Manifest
/// mode reads a text file naming the training images by their `class/file`
/// relative paths, one per line (blank lines and lines starting with `#` are
/// ignored), and sends the remaining images to the test part; every class
/// must keep at least one image on each side.
std::pair<FaceDataset, FaceDataset> split_train_test(const FaceDataset& ds,
                                                     const SplitSpec& spec);

}  // namespace bsr
