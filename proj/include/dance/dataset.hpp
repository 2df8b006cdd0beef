#ifndef DANCE_DATASET_HPP
#define DANCE_DATASET_HPP

#include <string>
#include <vector>

#include "dance/oracle.hpp"

namespace dance {

// CSV schema, one row per sample:
//   net_id, kind, arch_onehot[7L], df_onehot[3], pex_onehot[17],
//   pey_onehot[17], rf_onehot[5], latency_ms, energy_mj, area_um2
// Header row mandatory; floats carry 9 significant digits.
std::string dataset_csv_header(int positions);
void write_dataset_csv(const std::string& path, const std::vector<DatasetRecord>& records,
                       int positions);

struct Dataset {
  int positions = 0;
  std::vector<DatasetRecord> records;

  std::vector<std::int64_t> net_ids() const;  // unique, ascending
};

Dataset read_dataset_csv(const std::string& path);

// Seeded 80/20-style split by network id; every row of a network lands on
// the same side.
struct DatasetSplit {
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> val_ids;
};

DatasetSplit split_by_network(const Dataset& dataset, double val_fraction, std::uint64_t seed);

}  // namespace dance

#endif
