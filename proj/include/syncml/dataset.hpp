#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "syncml/sparse_matrix.hpp"

namespace syncml {

// Data matrix A (m samples x n features) with one regression target per
// sample. Classification labels (+1/-1) are used as regression targets.
struct Dataset {
  SparseMatrix features;
  std::vector<double> labels;

  std::size_t samples() const { return features.rows(); }
  std::size_t dims() const { return features.cols(); }
};

// LIBSVM text: one sample per line, `label idx:val idx:val ...` with 1-based,
// strictly increasing indices. Blank lines and `#` comments are ignored.
// The feature count is the largest index seen unless `n_features` is given.
Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> n_features = std::nullopt);
Dataset load_libsvm(const std::filesystem::path& path,
                    std::optional<std::size_t> n_features = std::nullopt);
void write_libsvm(std::ostream& out, const Dataset& data);
void save_libsvm(const std::filesystem::path& path, const Dataset& data);

// Binary cache of a parsed dataset: "SYNCMLDS" magic, u32 version, u64
// rows/cols/nnz, then col_ptr (u64), row_idx (u32), values and labels (f64),
// all little-endian.
inline constexpr std::uint32_t kBinaryCacheVersion = 1;
void save_binary(const std::filesystem::path& path, const Dataset& data);
Dataset load_binary(const std::filesystem::path& path);

// Loads `.bin` caches directly and everything else as LIBSVM text.
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::size_t> n_features = std::nullopt);

struct SyntheticSpec {
  std::size_t samples = 200;
  std::size_t features = 100;
  double density = 0.1;      // expected fraction of nonzeros per column
  double noise = 0.1;        // std-dev of additive label noise
  std::uint64_t seed = 42;
};

// Sparse Gaussian design with labels y = A w + noise, w ~ N(0, 1/sqrt(n)).
// Every column gets at least one nonzero. Deterministic for a given spec.
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace syncml
