#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "syncml/dataset.hpp"
#include "syncml/ridge.hpp"

namespace testing_util {

inline syncml::Dataset to_dataset(const oracle::Dense& d, std::vector<double> y) {
  return {syncml::SparseMatrix::from_dense(d.m, d.n, d.a), std::move(y)};
}

inline syncml::RidgeProblem problem(const oracle::Dense& d, std::vector<double> y, double lambda) {
  return syncml::RidgeProblem(to_dataset(d, std::move(y)), lambda);
}

inline std::filesystem::path data_dir() { return SYNCML_TEST_DATA_DIR; }

inline syncml::Dataset tiny() { return syncml::load_dataset(data_dir() / "tiny.svm"); }

// A fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("syncml_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_util
