#pragma once

// Bags, datasets and their on-disk formats.
//
// Feature file ("MILF"), all little-endian:
//   offset 0   4 bytes   magic "MILF"
//   offset 4   u32       K, number of patches (rows)
//   offset 8   u32       D, feature dimension (cols)
//   offset 12  K*D f32   row-major payload
// Files whose name ends in ".csv" are read instead as K lines of D
// comma-separated decimals.
//
// Manifest: CSV with header "bag_id,label,path"; label in {0,1}; path is
// resolved relative to the manifest's directory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rankmil/detail/bytes.hpp"
#include "rankmil/detail/csv.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/numerics.hpp"

namespace rankmil {

enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

inline int to_int(Label l) noexcept { return l == Label::Positive ? 1 : 0; }

struct Bag {
  std::string id;
  Label label = Label::Negative;
  Matrix features;  // K patches x D dims

  std::size_t num_patches() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  friend bool operator==(const Bag&, const Bag&) = default;
};

struct Dataset {
  std::vector<Bag> bags;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return bags.size(); }
  bool empty() const noexcept { return bags.empty(); }

  std::size_t count(Label label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(bags.begin(), bags.end(), [&](const Bag& b) { return b.label == label; }));
  }

  std::vector<std::size_t> indices_of(Label label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bags.size(); ++i) {
      if (bags[i].label == label) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ManifestRow {
  std::string bag_id;
  Label label = Label::Negative;
  std::string path;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct Manifest {
  std::vector<ManifestRow> rows;
};

inline constexpr char kFeatureMagic[4] = {'M', 'I', 'L', 'F'};
inline constexpr std::size_t kFeatureHeaderBytes = 12;

/// Checks the Bag invariants and the per-dataset dimension rule, then appends.
inline void add_bag(Dataset& ds, Bag bag) {
  if (bag.num_patches() == 0 || bag.dim() == 0) {
    throw DataError("bag '" + bag.id + "' has no patches or zero dimension");
  }
  if (!bag.features.all_finite()) throw DataError("bag '" + bag.id + "' has non-finite features");
  if (ds.bags.empty() && ds.dim == 0) ds.dim = bag.dim();
  if (bag.dim() != ds.dim) {
    throw DataError("dimension mismatch: bag '" + bag.id + "' has D=" + std::to_string(bag.dim()) +
                    " but dataset has D=" + std::to_string(ds.dim) +
                    (ds.bags.empty() ? std::string() : " (first bag '" + ds.bags.front().id + "')"));
  }
  for (const auto& b : ds.bags) {
    if (b.id == bag.id) throw DataError("duplicate bag id '" + bag.id + "'");
  }
  ds.bags.push_back(std::move(bag));
}

namespace detail {

inline Matrix parse_feature_binary(std::span<const unsigned char> bytes, const std::string& where) {
  if (bytes.size() < kFeatureHeaderBytes) {
    throw FormatError(where + ": truncated header at byte " + std::to_string(bytes.size()) +
                      " (need " + std::to_string(kFeatureHeaderBytes) + ")");
  }
  if (!std::equal(std::begin(kFeatureMagic), std::end(kFeatureMagic), bytes.begin())) {
    throw FormatError(where + ": bad magic at byte 0 (expected \"MILF\")");
  }
  const std::uint64_t rows = get_u32(bytes, 4);
  const std::uint64_t cols = get_u32(bytes, 8);
  if (rows == 0 || cols == 0) {
    throw FormatError(where + ": header declares K=" + std::to_string(rows) +
                      ", D=" + std::to_string(cols) + " at byte 4; both must be >= 1");
  }
  const std::uint64_t expected = kFeatureHeaderBytes + rows * cols * 4;
  if (bytes.size() < expected) {
    throw FormatError(where + ": truncated payload, file ends at byte " +
                      std::to_string(bytes.size()) + " but header implies " +
                      std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) {
    throw FormatError(where + ": " + std::to_string(bytes.size() - expected) +
                      " trailing bytes after payload at byte " + std::to_string(expected));
  }
  Matrix m(rows, cols);
  auto out = m.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t offset = kFeatureHeaderBytes + 4 * i;
    const float v = get_f32(bytes, offset);
    if (!std::isfinite(v)) {
      throw FormatError(where + ": non-finite value at byte " + std::to_string(offset));
    }
    out[i] = static_cast<double>(v);
  }
  return m;
}

inline Matrix parse_feature_csv(std::string_view text, const std::string& where) {
  const auto lines = parse_csv(text);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  for (const auto& line : lines) {
    if (is_blank_line(line)) {
      throw FormatError(where + ": blank line at line " + std::to_string(line.number));
    }
    if (rows == 0) {
      cols = line.cells.size();
    } else if (line.cells.size() != cols) {
      throw FormatError(where + ": ragged row at line " + std::to_string(line.number) + " (" +
                        std::to_string(line.cells.size()) + " values, expected " +
                        std::to_string(cols) + ")");
    }
    for (std::size_t c = 0; c < line.cells.size(); ++c) {
      const auto v = parse_double(line.cells[c]);
      if (!v) {
        throw FormatError(where + ": bad value '" + line.cells[c] + "' at line " +
                          std::to_string(line.number) + ", column " + std::to_string(c + 1));
      }
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(where + ": empty feature CSV");
  return Matrix(rows, cols, std::move(values));
}

}  // namespace detail

inline Matrix load_feature_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing feature file: " + path.string());
  const auto bytes = detail::read_file(path);
  if (path.extension() == ".csv") {
    return detail::parse_feature_csv(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
  }
  return detail::parse_feature_binary(bytes, path.string());
}

inline std::vector<unsigned char> encode_feature_file(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidArgument("feature matrix must be non-empty");
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("feature matrix too large for the MILF header");
  }
  std::vector<unsigned char> out(std::begin(kFeatureMagic), std::end(kFeatureMagic));
  out.reserve(kFeatureHeaderBytes + 4 * m.data().size());
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) detail::put_f32(out, static_cast<float>(v));
  return out;
}

/// Writes the binary format; values are narrowed to f32.
inline void write_feature_file(const std::filesystem::path& path, const Matrix& m) {
  detail::write_file(path, encode_feature_file(m));
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing manifest: " + path.string());
  const auto lines = detail::parse_csv(detail::read_text(path));
  const std::string where = path.string();
  if (lines.empty() || lines.front().cells != std::vector<std::string>{"bag_id", "label", "path"}) {
    throw FormatError(where + ": line 1: expected header 'bag_id,label,path'");
  }
  Manifest manifest;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const std::string at = where + ": line " + std::to_string(line.number);
    if (line.cells.size() != 3) {
      throw FormatError(at + ": expected 3 fields, got " + std::to_string(line.cells.size()));
    }
    const auto id = std::string(detail::trim(line.cells[0]));
    const auto label = detail::trim(line.cells[1]);
    const auto file = std::string(detail::trim(line.cells[2]));
    if (id.empty()) throw FormatError(at + ": empty bag_id");
    if (label != "0" && label != "1") {
      throw DataError(at + ": label '" + std::string(label) + "' for bag '" + id +
                      "' is not in {0,1}");
    }
    manifest.rows.push_back({id, label == "1" ? Label::Positive : Label::Negative, file});
  }
  return manifest;
}

inline std::string format_manifest(const Manifest& manifest) {
  std::string out = "bag_id,label,path\n";
  for (const auto& row : manifest.rows) {
    out += row.bag_id + "," + std::to_string(to_int(row.label)) + "," + row.path + "\n";
  }
  return out;
}

/// Loads every bag a manifest references, in manifest order.
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const auto manifest = load_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  Dataset ds;
  std::unordered_set<std::string> seen;
  for (const auto& row : manifest.rows) {
    if (!seen.insert(row.bag_id).second) throw DataError("duplicate bag id '" + row.bag_id + "'");
    const auto file = base / row.path;
    if (!std::filesystem::exists(file)) {
      throw DataError("bag '" + row.bag_id + "': missing feature file " + file.string());
    }
    add_bag(ds, Bag{row.bag_id, row.label, load_feature_file(file)});
  }
  return ds;
}

/// Per-class shuffled split. The first part gets round(fraction * n_class)
/// bags of each class, clamped so both parts keep at least one per class.
/// Bags keep their original relative order inside each part.
inline std::pair<Dataset, Dataset> split_stratified(const Dataset& ds, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("split_stratified: fraction must lie in (0, 1)");
  }
  std::vector<bool> in_first(ds.size(), false);
  for (Label label : {Label::Positive, Label::Negative}) {
    auto idx = ds.indices_of(label);
    if (idx.size() < 2) {
      throw InvalidArgument("split_stratified: class " + std::to_string(to_int(label)) +
                            " has " + std::to_string(idx.size()) + " bag(s), need >= 2");
    }
    rng.shuffle(idx);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    for (std::size_t i = 0; i < take; ++i) in_first[idx[i]] = true;
  }
  Dataset first{{}, ds.dim};
  Dataset second{{}, ds.dim};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_first[i] ? first : second).bags.push_back(ds.bags[i]);
  }
  return {std::move(first), std::move(second)};
}

}  // namespace rankmil
