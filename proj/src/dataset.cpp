#include "turnover/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "turnover/error.hpp"
#include "turnover/rng.hpp"

namespace turnover {

Dataset::Dataset(std::vector<Instance> instances, std::size_t n_classes)
    : instances_(std::move(instances)), n_classes_(n_classes) {
  if (n_classes_ < 2) throw DataError("a dataset needs at least two classes");
  feature_dim_ = instances_.empty() ? 0 : instances_.front().features.size();
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    auto& inst = instances_[i];
    inst.id = i;
    if (inst.features.size() != feature_dim_) {
      throw DataError("instance " + std::to_string(i) + " has " +
                      std::to_string(inst.features.size()) + " features, expected " +
                      std::to_string(feature_dim_));
    }
    if (inst.label >= n_classes_) {
      throw DataError("instance " + std::to_string(i) + " has label " + std::to_string(inst.label) +
                      " but only " + std::to_string(n_classes_) + " classes");
    }
  }
}

std::vector<std::uint64_t> Dataset::ids() const {
  std::vector<std::uint64_t> out(instances_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

void Dataset::set_flipped_ids(std::vector<std::uint64_t> ids) {
  std::sort(ids.begin(), ids.end());
  for (auto id : ids) {
    if (id >= instances_.size()) throw DataError("flipped id out of range");
  }
  flipped_ids_ = std::move(ids);
}

Dataset Dataset::without(std::span<const std::uint64_t> removed) const {
  std::set<std::uint64_t> drop(removed.begin(), removed.end());
  std::vector<Instance> kept;
  std::vector<std::uint64_t> new_id(instances_.size(), 0);
  for (const auto& inst : instances_) {
    if (drop.count(inst.id)) continue;
    new_id[inst.id] = kept.size();
    kept.push_back(inst);
  }
  Dataset out(std::move(kept), n_classes_);
  std::vector<std::uint64_t> flipped;
  for (auto id : flipped_ids_) {
    if (!drop.count(id)) flipped.push_back(new_id[id]);
  }
  out.set_flipped_ids(std::move(flipped));
  return out;
}

Instance Dataset::relabeled(std::uint64_t id, std::size_t label) const {
  Instance inst = (*this)[id];
  if (label >= n_classes_) throw DataError("label out of range");
  inst.label = label;
  return inst;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                         : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Instance> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (schema.header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() < 2) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": need at least one feature and a label");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " columns, found " + std::to_string(fields.size()));
    }
    Instance inst;
    inst.features.resize(width - 1);
    for (std::size_t c = 0; c + 1 < width; ++c) {
      const auto cell = trim(fields[c]);
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), inst.features[c]);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": column " +
                        std::to_string(c + 1) + " is not numeric: '" + std::string(cell) + "'");
      }
    }
    const auto label_cell = trim(fields.back());
    auto [ptr, ec] =
        std::from_chars(label_cell.data(), label_cell.data() + label_cell.size(), inst.label);
    if (ec != std::errc() || ptr != label_cell.data() + label_cell.size() || label_cell.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": label is not a non-negative integer: '" + std::string(label_cell) + "'");
    }
    max_label = std::max(max_label, inst.label);
    rows.push_back(std::move(inst));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  std::size_t classes = schema.n_classes != 0 ? schema.n_classes : std::max<std::size_t>(2, max_label + 1);
  return Dataset(std::move(rows), classes);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t c = 0; c < data.feature_dim(); ++c) out << 'x' << c << ',';
  out << "label\n";
  char buf[32];
  for (const auto& inst : data.instances()) {
    for (double v : inst.features) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << inst.label << '\n';
  }
}

Splits split_dataset(const Dataset& data, std::size_t n_val, std::size_t n_test, std::uint64_t seed) {
  if (n_val + n_test >= data.size()) {
    throw ConfigError("validation and test sizes leave no training data");
  }
  std::vector<std::uint64_t> order = data.ids();
  CounterRng(seed, streams::kSplit).shuffle(order);
  auto take = [&](std::size_t begin, std::size_t end) {
    std::vector<Instance> part;
    for (std::size_t i = begin; i < end; ++i) part.push_back(data[order[i]]);
    return Dataset(std::move(part), data.n_classes());
  };
  const std::size_t n_train = data.size() - n_val - n_test;
  Splits splits{take(0, n_train), take(n_train, n_train + n_val), take(n_train + n_val, data.size())};
  return splits;
}

}  // namespace turnover
