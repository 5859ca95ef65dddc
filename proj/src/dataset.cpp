#include "eos/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "eos/errors.hpp"

namespace eos {

namespace {

std::string exact(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

Dataset::Dataset(std::size_t n, std::size_t d, std::size_t classes, std::vector<double> features,
                 std::vector<int> labels)
    : n_(n), d_(d), classes_(classes), features_(std::move(features)), labels_(std::move(labels)) {
  if (n == 0 || d == 0 || classes == 0)
    throw ContractViolation("Dataset: n, d and classes must be positive");
  if (features_.size() != n * d || labels_.size() != n)
    throw ContractViolation("Dataset: feature/label array sizes do not match n x d");
  for (std::size_t i = 0; i < n; ++i)
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= classes)
      throw ContractViolation("Dataset: label out of range at example " + std::to_string(i));
  for (double x : features_)
    if (std::isnan(x)) throw ContractViolation("Dataset: NaN feature");
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.classes < 2) throw ContractViolation("synth_dataset: need at least 2 classes");
  if (spec.d < 1) throw ContractViolation("synth_dataset: d must be >= 1");
  if (spec.n < spec.classes) throw ContractViolation("synth_dataset: n must be >= classes");
  if (!(spec.cluster_spread >= 0.0)) throw ContractViolation("synth_dataset: spread must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> centers(spec.classes * spec.d);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double nrm = 0.0;
    do {
      nrm = 0.0;
      for (std::size_t j = 0; j < spec.d; ++j) {
        double x = gauss(rng);
        centers[c * spec.d + j] = x;
        nrm += x * x;
      }
    } while (nrm == 0.0);
    nrm = std::sqrt(nrm);
    for (std::size_t j = 0; j < spec.d; ++j) centers[c * spec.d + j] /= nrm;
  }

  std::vector<double> features(spec.n * spec.d);
  std::vector<int> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.classes;
    labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < spec.d; ++j)
      features[i * spec.d + j] = centers[c * spec.d + j] + spec.cluster_spread * gauss(rng);
  }

  Dataset out(spec.n, spec.d, spec.classes, std::move(features), std::move(labels));
  out.provenance["source"] = "synthetic-blobs";
  out.provenance["seed"] = std::to_string(spec.seed);
  out.provenance["n"] = std::to_string(spec.n);
  out.provenance["d"] = std::to_string(spec.d);
  out.provenance["classes"] = std::to_string(spec.classes);
  out.provenance["cluster_spread"] = exact(spec.cluster_spread);
  return out;
}

Dataset parse_cifar10_binary(const std::vector<unsigned char>& bytes,
                             std::optional<std::size_t> n_take) {
  const std::size_t complete = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t offset = complete * kCifarRecordBytes;
    throw FormatError("CIFAR-10: truncated record " + std::to_string(complete) + " at offset " +
                          std::to_string(offset) + " (file length " +
                          std::to_string(bytes.size()) + " not a multiple of 3073)",
                      offset);
  }
  if (complete == 0) throw FormatError("CIFAR-10: empty file", 0);
  const std::size_t n = n_take.value_or(complete);
  if (n == 0 || n > complete)
    throw ContractViolation("CIFAR-10: requested " + std::to_string(n) + " records, file has " +
                            std::to_string(complete));

  std::vector<double> features(n * kCifarPixels);
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t base = r * kCifarRecordBytes;
    const unsigned label = bytes[base];
    if (label >= 10)
      throw FormatError("CIFAR-10: record " + std::to_string(r) + " has label " +
                            std::to_string(label) + " at offset " + std::to_string(base),
                        base);
    labels[r] = static_cast<int>(label);
    for (std::size_t p = 0; p < kCifarPixels; ++p)
      features[r * kCifarPixels + p] = bytes[base + 1 + p] / 255.0;
  }

  // Channel planes are 1024 bytes each (R, G, B).
  constexpr std::size_t plane = kCifarPixels / 3;
  std::map<std::string, std::string> prov;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t p = 0; p < plane; ++p) sum += features[r * kCifarPixels + ch * plane + p];
    const double count = static_cast<double>(n * plane);
    const double mean = sum / count;
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t p = 0; p < plane; ++p) {
        const double dlt = features[r * kCifarPixels + ch * plane + p] - mean;
        var += dlt * dlt;
      }
    double sd = std::sqrt(var / count);
    if (sd == 0.0) sd = 1.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t p = 0; p < plane; ++p) {
        double& x = features[r * kCifarPixels + ch * plane + p];
        x = (x - mean) / sd;
      }
    prov["channel" + std::to_string(ch) + "_mean"] = exact(mean);
    prov["channel" + std::to_string(ch) + "_std"] = exact(sd);
  }

  Dataset out(n, kCifarPixels, 10, std::move(features), std::move(labels));
  out.provenance = std::move(prov);
  out.provenance["source"] = "cifar10-binary";
  out.provenance["n"] = std::to_string(n);
  return out;
}

Dataset load_cifar10_binary(const std::filesystem::path& path, std::optional<std::size_t> n_take) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("CIFAR-10: cannot open " + path.string(), 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Dataset out = parse_cifar10_binary(bytes, n_take);
  out.provenance["path"] = path.string();
  return out;
}

Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n > data.size() || n == 0)
    throw ContractViolation("subsample: n must be in [1, " + std::to_string(data.size()) + "]");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::sample(idx.begin(), idx.end(), std::back_inserter(picked), n, rng);
  std::sort(picked.begin(), picked.end());

  std::vector<double> features;
  features.reserve(n * data.dim());
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t i : picked) {
    features.insert(features.end(), data.example(i), data.example(i) + data.dim());
    labels.push_back(data.label(i));
  }
  Dataset out(n, data.dim(), data.classes(), std::move(features), std::move(labels));
  out.provenance = data.provenance;
  out.provenance["subsample_n"] = std::to_string(n);
  out.provenance["subsample_seed"] = std::to_string(seed);
  return out;
}

}  // namespace eos
