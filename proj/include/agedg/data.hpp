#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agedg/domain.hpp"
#include "agedg/matrix.hpp"

namespace agedg::data {

// ---------------------------------------------------------------------------
// Manifests. UTF-8 CSV with header `id,path,age,emotion,valence,arousal`.
// ---------------------------------------------------------------------------

struct ManifestOptions {
  /// Verify that every `path` that is not a sidecar reference exists on disk,
  /// relative to the manifest's directory.
  bool check_paths = false;
};

struct ManifestLoad {
  std::vector<Sample> samples;  // file order, inputs empty
  std::size_t skipped_rows = 0;
  std::vector<std::string> skipped_diagnostics;
};

/// Rows with ages outside [18, 85] are skipped and counted; any other malformed
/// row throws DataError naming the line (header is line 1) and field.
ManifestLoad load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});
void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples);

// ---------------------------------------------------------------------------
// Sidecar input arrays. Binary little-endian container:
//   "AGDGARR1" | u32 version | u32 mode | u64 rows | u64 height | u64 width | u64 channels
//   | rows * (height*width*channels) f64, row-major.
// Manifest rows refer to an array row with a path of the form `<file>#<row>`.
// ---------------------------------------------------------------------------

struct InputArray {
  InputShape shape;
  Matrix<double> values;
};

void write_input_array(const std::filesystem::path& path, const InputShape& shape,
                       const std::vector<Sample>& samples);
InputArray read_input_array(const std::filesystem::path& path);

struct Dataset {
  InputShape shape;
  std::vector<Sample> samples;
  std::size_t skipped_rows = 0;
};

/// Loads a manifest and attaches each row's input from the sidecar array.
Dataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& inputs);

// ---------------------------------------------------------------------------
// Splitting and budget equalisation.
// ---------------------------------------------------------------------------

struct SplitFractions {
  double validation = 0.2;
  double test = 0.2;
};

/// Within each domain: seeded shuffle, floor(n * validation) to validation,
/// floor(n * test) to test, the remainder to train. Lists keep input order.
DomainSplit split_by_fractions(const std::vector<Sample>& samples, const InputShape& shape,
                               const SplitFractions& fractions, std::uint64_t seed);

using DomainCounts = std::array<std::size_t, kNumAgeGroups>;

/// Proportional allocation of `budget` over the active pools with
/// largest-remainder rounding (ties to the lower ordinal). Throws ConfigError
/// naming the shortfall when the budget exceeds the active pools.
DomainCounts allocate_budget(const DomainCounts& pools, const DomainSet& active,
                             std::size_t budget);

/// Subsamples train sets without replacement per allocate_budget. Inactive
/// domains get empty train sets; validation/test sets are untouched.
DomainSplit equalize_training_budget(const DomainSplit& split, const DomainSet& active,
                                     std::size_t total_budget, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic multi-domain data.
// ---------------------------------------------------------------------------

struct SynthSpec {
  /// Samples per domain, in ordinal order; length = number of domains (1..5).
  std::vector<std::size_t> per_domain{300, 300, 300, 300, 300};
  std::size_t dim = 20;
  /// Rotation angle step between neighbouring domains, radians.
  double shift = 0.4;
  double noise = 1.0;
  double prototype_scale = 1.0;
  double affect_scale = 1.5;
  double affect_noise = 0.15;
  InputMode mode = InputMode::features;
  std::size_t image_height = 16;
  std::size_t image_width = 16;
  std::size_t image_channels = 1;
  SplitFractions fractions;

  InputShape shape() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Generates samples: uniform class, class-conditioned valence/arousal, an
/// input = prototype(class) + affect directions + noise, rotated by
/// shift * ordinal in every coordinate plane (0,1), (2,3), ...
Dataset synthesize_samples(const SynthSpec& spec, std::uint64_t seed);

/// synthesize_samples followed by split_by_fractions with the same seed.
DomainSplit synthesize_dataset(const SynthSpec& spec, std::uint64_t seed);

/// Stacks sample inputs into an n x input_size matrix.
Matrix<double> stack_inputs(const std::vector<const Sample*>& samples, std::size_t input_size);

}  // namespace agedg::data
