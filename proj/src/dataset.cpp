#include "dance/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dance/util.hpp"

namespace dance {

namespace {

void append_onehot(std::string& out, int hot, int size) {
  for (int i = 0; i < size; ++i) {
    out += ',';
    out += (i == hot) ? '1' : '0';
  }
}

double parse_double(std::string_view field, const char* what) {
  double v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw std::runtime_error(std::string("dataset: bad ") + what + " field");
  return v;
}

}  // namespace

std::string dataset_csv_header(int positions) {
  std::ostringstream ss;
  ss << "net_id,kind";
  for (int i = 0; i < positions * kNumCandidateOps; ++i) ss << ",arch_" << i;
  for (int i = 0; i < kNumDataflows; ++i) ss << ",df_" << i;
  for (int i = 0; i < kNumPeValues; ++i) ss << ",pex_" << i;
  for (int i = 0; i < kNumPeValues; ++i) ss << ",pey_" << i;
  for (int i = 0; i < kNumRfValues; ++i) ss << ",rf_" << i;
  ss << ",latency_ms,energy_mj,area_um2";
  return ss.str();
}

void write_dataset_csv(const std::string& path, const std::vector<DatasetRecord>& records,
                       int positions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  out << dataset_csv_header(positions) << '\n';
  std::string line;
  for (const auto& rec : records) {
    if (static_cast<int>(rec.arch_onehot.size()) != positions * kNumCandidateOps)
      throw std::runtime_error("dataset record arch width mismatch");
    line.clear();
    line += std::to_string(rec.net_id);
    line += rec.optimal ? ",opt" : ",rand";
    for (double v : rec.arch_onehot) {
      line += ',';
      line += format_g9(v);
    }
    append_onehot(line, dataflow_index(rec.config.dataflow), kNumDataflows);
    append_onehot(line, pe_index(rec.config.pe_x), kNumPeValues);
    append_onehot(line, pe_index(rec.config.pe_y), kNumPeValues);
    append_onehot(line, rf_index(rec.config.rf_size), kNumRfValues);
    line += ',';
    line += format_g9(rec.costs.latency_ms);
    line += ',';
    line += format_g9(rec.costs.energy_mj);
    line += ',';
    line += format_g9(rec.costs.area_um2);
    line += '\n';
    out << line;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);

  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("dataset is empty: " + path);

  // infer L from the column count
  const std::size_t n_cols = std::count(header.begin(), header.end(), ',') + 1;
  const std::size_t fixed = 2 + kNumDataflows + 2 * kNumPeValues + kNumRfValues + 3;
  if (n_cols < fixed + kNumCandidateOps || (n_cols - fixed) % kNumCandidateOps != 0)
    throw std::runtime_error("dataset header has unexpected column count");
  const int positions = static_cast<int>((n_cols - fixed) / kNumCandidateOps);
  if (header != dataset_csv_header(positions))
    throw std::runtime_error("dataset header does not match the expected schema");

  Dataset ds;
  ds.positions = positions;
  const int arch_width = positions * kNumCandidateOps;

  std::string line;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(std::string_view(line).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != n_cols) throw std::runtime_error("dataset row has wrong field count");

    DatasetRecord rec;
    rec.net_id = static_cast<std::int64_t>(parse_double(fields[0], "net_id"));
    if (fields[1] == "opt")
      rec.optimal = true;
    else if (fields[1] == "rand")
      rec.optimal = false;
    else
      throw std::runtime_error("dataset: kind must be opt or rand");

    std::size_t at = 2;
    rec.arch_onehot.resize(arch_width);
    for (int i = 0; i < arch_width; ++i) rec.arch_onehot[i] = parse_double(fields[at++], "arch");

    auto read_hot = [&](int size, const char* what) {
      int hot = -1;
      for (int i = 0; i < size; ++i) {
        const double v = parse_double(fields[at++], what);
        if (v != 0.0) {
          if (v != 1.0 || hot != -1) throw std::runtime_error("dataset: malformed one-hot");
          hot = i;
        }
      }
      if (hot < 0) throw std::runtime_error("dataset: empty one-hot");
      return hot;
    };
    rec.config.dataflow = dataflow_from_index(read_hot(kNumDataflows, "df"));
    rec.config.pe_x = pe_from_index(read_hot(kNumPeValues, "pex"));
    rec.config.pe_y = pe_from_index(read_hot(kNumPeValues, "pey"));
    rec.config.rf_size = rf_from_index(read_hot(kNumRfValues, "rf"));
    rec.costs.latency_ms = parse_double(fields[at++], "latency");
    rec.costs.energy_mj = parse_double(fields[at++], "energy");
    rec.costs.area_um2 = parse_double(fields[at++], "area");
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::vector<std::int64_t> Dataset::net_ids() const {
  std::set<std::int64_t> ids;
  for (const auto& rec : records) ids.insert(rec.net_id);
  return std::vector<std::int64_t>(ids.begin(), ids.end());
}

DatasetSplit split_by_network(const Dataset& dataset, double val_fraction, std::uint64_t seed) {
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("val_fraction must be in (0, 1)");
  std::vector<std::int64_t> ids = dataset.net_ids();

  // Fisher-Yates with our own rng so the split is stable across platforms.
  Rng rng(mix_seed(seed, 0x5317ULL));
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.next_int(0, static_cast<std::int64_t>(i) - 1)]);

  std::size_t n_val = static_cast<std::size_t>(ids.size() * val_fraction);
  n_val = std::min(std::max<std::size_t>(n_val, 1), ids.size() - 1);

  DatasetSplit split;
  split.val_ids.assign(ids.begin(), ids.begin() + n_val);
  split.train_ids.assign(ids.begin() + n_val, ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  return split;
}

}  // namespace dance
