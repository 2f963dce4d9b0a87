#include "syncml/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <string_view>

#include "syncml/error.hpp"

namespace syncml {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary cache and wire format assume a little-endian host");

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view next_token(std::string_view& rest) {
  std::size_t b = 0;
  while (b < rest.size() && is_space(rest[b])) ++b;
  std::size_t e = b;
  while (e < rest.size() && !is_space(rest[e])) ++e;
  auto tok = rest.substr(b, e - b);
  rest.remove_prefix(e);
  return tok;
}

double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  // from_chars rejects a leading '+', which some writers emit.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ParseError(std::string("malformed ") + what + " '" + std::string(s) + "'", line);
  return v;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> n_features) {
  std::vector<Triplet> entries;
  std::vector<double> labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    auto label_tok = next_token(rest);
    if (label_tok.empty()) continue;
    const double label = parse_double(label_tok, line_no, "label");
    const auto row = static_cast<Index>(labels.size());
    std::size_t prev = 0;
    for (auto tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError("expected idx:val, got '" + std::string(tok) + "'", line_no);
      std::size_t idx = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (ec != std::errc() || p != tok.data() + colon)
        throw ParseError("malformed index '" + std::string(tok.substr(0, colon)) + "'", line_no);
      if (idx == 0) throw ParseError("indices are 1-based; got 0", line_no);
      if (idx <= prev)
        throw ParseError("indices must be strictly increasing (" + std::to_string(idx) +
                             " after " + std::to_string(prev) + ")",
                         line_no);
      prev = idx;
      const double val = parse_double(tok.substr(colon + 1), line_no, "value");
      max_index = std::max(max_index, idx);
      entries.push_back({row, static_cast<Index>(idx - 1), val});
    }
    labels.push_back(label);
  }
  std::size_t cols = max_index;
  if (n_features) {
    if (*n_features < max_index)
      throw ConfigError("feature count " + std::to_string(*n_features) +
                        " is smaller than the largest index " + std::to_string(max_index));
    cols = *n_features;
  }
  return {SparseMatrix::from_triplets(labels.size(), cols, std::move(entries)),
          std::move(labels)};
}

Dataset load_libsvm(const std::filesystem::path& path, std::optional<std::size_t> n_features) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset not found: " + path.string());
  return parse_libsvm(in, n_features);
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  const SparseMatrix rows = data.features.transposed();
  std::array<char, 64> buf{};
  auto put = [&](double v) {
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), p - buf.data());
  };
  for (std::size_t i = 0; i < data.samples(); ++i) {
    put(data.labels[i]);
    const auto r = rows.column(i);
    for (std::size_t p = 0; p < r.nnz(); ++p) {
      out << ' ' << (r.rows[p] + 1) << ':';
      put(r.values[p]);
    }
    out << '\n';
  }
}

void save_libsvm(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_libsvm(out, data);
}

namespace {

constexpr char kCacheMagic[8] = {'S', 'Y', 'N', 'C', 'M', 'L', 'D', 'S'};

template <class T>
void write_raw(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <class T>
void read_raw(std::istream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw ConfigError("binary cache truncated");
}

}  // namespace

void save_binary(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  const auto& a = data.features;
  const std::uint32_t version = kBinaryCacheVersion;
  const std::uint64_t dims[3] = {a.rows(), a.cols(), a.nnz()};
  out.write(kCacheMagic, sizeof kCacheMagic);
  write_raw(out, &version, 1);
  write_raw(out, dims, 3);
  std::vector<std::uint64_t> ptr(a.col_ptr().begin(), a.col_ptr().end());
  write_raw(out, ptr.data(), ptr.size());
  write_raw(out, a.row_idx().data(), a.nnz());
  write_raw(out, a.values().data(), a.nnz());
  write_raw(out, data.labels.data(), data.labels.size());
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("dataset not found: " + path.string());
  char magic[8];
  read_raw(in, magic, 8);
  if (std::memcmp(magic, kCacheMagic, 8) != 0) throw ConfigError("not a dataset cache");
  std::uint32_t version = 0;
  read_raw(in, &version, 1);
  if (version != kBinaryCacheVersion)
    throw ConfigError("unsupported cache version " + std::to_string(version));
  std::uint64_t dims[3];
  read_raw(in, dims, 3);
  std::vector<std::uint64_t> ptr(dims[1] + 1);
  read_raw(in, ptr.data(), ptr.size());
  std::vector<Index> idx(dims[2]);
  read_raw(in, idx.data(), idx.size());
  std::vector<double> val(dims[2]);
  read_raw(in, val.data(), val.size());
  std::vector<double> labels(dims[0]);
  read_raw(in, labels.data(), labels.size());
  return {SparseMatrix(dims[0], dims[1], std::vector<std::size_t>(ptr.begin(), ptr.end()),
                       std::move(idx), std::move(val)),
          std::move(labels)};
}

Dataset load_dataset(const std::filesystem::path& path, std::optional<std::size_t> n_features) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset not found: " + path.string());
  if (path.extension() == ".bin") {
    Dataset d = load_binary(path);
    if (n_features && *n_features != d.dims())
      throw ConfigError("feature override does not match binary cache");
    return d;
  }
  return load_libsvm(path, n_features);
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.samples == 0 || spec.features == 0) throw ConfigError("synthetic spec must be nonempty");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) throw ConfigError("density must be in (0,1]");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_row(0, spec.samples - 1);

  std::vector<std::size_t> col_ptr(spec.features + 1, 0);
  std::vector<Index> row_idx;
  std::vector<double> values;
  std::vector<Index> rows;
  for (std::size_t j = 0; j < spec.features; ++j) {
    rows.clear();
    if (spec.density >= 1.0) {
      for (std::size_t i = 0; i < spec.samples; ++i) rows.push_back(static_cast<Index>(i));
    } else {
      // Geometric skipping gives Bernoulli(density) rows in O(nnz).
      const double log_q = std::log1p(-spec.density);
      double pos = -1.0;
      for (;;) {
        pos += 1.0 + std::floor(std::log(1.0 - unit(rng)) / log_q);
        if (pos >= static_cast<double>(spec.samples)) break;
        rows.push_back(static_cast<Index>(pos));
      }
      if (rows.empty()) rows.push_back(static_cast<Index>(pick_row(rng)));
    }
    for (Index r : rows) {
      row_idx.push_back(r);
      values.push_back(gauss(rng));
    }
    col_ptr[j + 1] = row_idx.size();
  }
  SparseMatrix a(spec.samples, spec.features, std::move(col_ptr), std::move(row_idx),
                 std::move(values));

  std::vector<double> w(spec.features);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.features));
  for (auto& x : w) x = gauss(rng) * scale;
  std::vector<double> y(spec.samples);
  a.multiply(w, y);
  for (auto& x : y) x += spec.noise * gauss(rng);
  return {std::move(a), std::move(y)};
}

}  // namespace syncml
