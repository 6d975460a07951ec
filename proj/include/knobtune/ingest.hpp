#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace knobtune {

/// Column roles shared by every workload file. Knob and metric order fixes
/// the layout of Observation vectors.
struct Schema {
  std::vector<std::string> knob_names;
  std::vector<std::string> metric_names;
  std::string latency_name;
  std::string workload_id_name;

  /// Throws DataError on empty knob/metric lists or overlapping names.
  void validate() const;

  /// Index into metric_names; throws DataError when absent.
  std::size_t metric_index(std::string_view name) const;

  bool operator==(const Schema&) const = default;
};

struct Observation {
  std::vector<double> knobs;
  std::vector<double> metrics;
  double latency = 0.0;  // milliseconds

  bool operator==(const Observation&) const = default;
};

/// All observations of one workload id, in input order.
struct WorkloadTable {
  std::string workload_id;
  std::vector<Observation> observations;
  std::shared_ptr<const Schema> schema;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
};

struct Corpus {
  std::vector<WorkloadTable> offline;
  std::vector<WorkloadTable> online_b;
  std::vector<WorkloadTable> online_c;
  std::shared_ptr<const Schema> schema;

  std::size_t total_rows() const;
};

struct CorpusFiles {
  std::vector<std::filesystem::path> offline;
  std::vector<std::filesystem::path> online_b;
  std::vector<std::filesystem::path> online_c;
};

/// JSON manifest: `workload_id`, `latency`, `knobs`, `metrics`, plus optional
/// `offline` / `online_b` / `online_c` file lists relative to the manifest.
struct Manifest {
  Schema schema;
  CorpusFiles files;
};

Manifest read_manifest(const std::filesystem::path& path);

/// File lists are written relative to the manifest's directory when possible.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Numeric literal, or a boolean spelling (true/false, on/off, yes/no in any
/// case) mapped to 1.0/0.0. Throws DataError on anything else.
double encode_cell(std::string_view cell);

/// Parse the given CSV files and group rows by workload id. Tables come back
/// sorted by id; rows keep file order.
std::vector<WorkloadTable> load_tables(std::span<const std::filesystem::path> paths,
                                       const std::shared_ptr<const Schema>& schema);

Corpus load_corpus(const CorpusFiles& files, const Schema& schema);
Corpus load_corpus(const std::filesystem::path& manifest_path);

struct ConstantDrop {
  Corpus corpus;
  std::vector<std::string> dropped;  // sorted
};

/// Remove knob and metric columns that hold one exact value over every row
/// of every workload. Latency and workload id are never touched.
ConstantDrop drop_constant_columns(const Corpus& corpus);

struct MapValidationSplit {
  WorkloadTable map_part;
  WorkloadTable validation_part;
  std::size_t ignored_rows = 0;
};

/// First n_map rows for mapping, row n_map for validation; anything after is
/// ignored with a warning.
MapValidationSplit split_map_validation(const WorkloadTable& table, std::size_t n_map);

/// Schema-ordered CSV with the workload id as first column.
void write_workload_csv(const WorkloadTable& table, const std::filesystem::path& path);

void write_name_list(std::span<const std::string> names, const std::filesystem::path& path);
std::vector<std::string> read_name_list(const std::filesystem::path& path);

}  // namespace knobtune
