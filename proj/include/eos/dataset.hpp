#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eos {

/// Labeled examples, row-major features (n x d) and labels in [0, classes).
/// Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t n, std::size_t d, std::size_t classes, std::vector<double> features,
          std::vector<int> labels);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  std::size_t classes() const { return classes_; }
  const double* example(std::size_t i) const { return features_.data() + i * d_; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<double>& features() const { return features_; }

  /// Source, seed, standardization constants and the like; serialized into
  /// trace headers.
  std::map<std::string, std::string> provenance;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
};

struct SynthSpec {
  std::size_t n = 512;
  std::size_t d = 16;
  std::size_t classes = 4;
  double cluster_spread = 0.5;
  std::uint64_t seed = 0;
};

/// Gaussian blobs around unit-norm random class centers. Example i has label
/// i mod classes, so class counts differ by at most one.
Dataset synth_dataset(const SynthSpec& spec);

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarPixels = 3072;

/// Reads the CIFAR-10 binary batch format (1 label byte + 3072 pixel bytes per
/// record). Takes the first `n_take` records (all if unset). Pixels are scaled
/// to [0,1], then standardized per channel over the loaded subset.
Dataset load_cifar10_binary(const std::filesystem::path& path,
                            std::optional<std::size_t> n_take = std::nullopt);
Dataset parse_cifar10_binary(const std::vector<unsigned char>& bytes,
                             std::optional<std::size_t> n_take = std::nullopt);

/// Uniform sample of n examples without replacement, kept in original order.
Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed);

}  // namespace eos
