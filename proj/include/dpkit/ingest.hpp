#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpkit/core.hpp"
#include "dpkit/serializer.hpp"

namespace dpkit::ingest {

// Parse failure in a data file; carries the 1-based physical line where the
// offending record starts.
struct ParseError : Error {
  ParseError(std::size_t line_number, const std::string& reason)
      : Error("line " + std::to_string(line_number) + ": " + reason), line(line_number) {}
  std::size_t line;
};

struct LabelColumnMissing : Error {
  using Error::Error;
};
struct UnknownDataset : Error {
  using Error::Error;
};

enum class Split { Train, Valid, Test };
const char* to_string(Split split);

struct SplitFractions {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct SplitProtocol {
  enum class Kind { Provided, SeededFraction };
  Kind kind = Kind::Provided;
  SplitFractions fractions;
};

// File names relative to the dataset directory. Provided-split datasets name
// per-split files; seeded-fraction datasets name a single data file.
struct DatasetFiles {
  std::string data;
  std::string train;
  std::string valid;
  std::string test;
};

struct DatasetDescriptor {
  std::string id;
  TaskKind task = TaskKind::ED;
  std::string domain_tag;
  DatasetFiles files;
  SplitProtocol split;
  char delimiter = ',';

  std::string label_field = "label";
  // ED: column whose value names the attribute under verification.
  std::string target_field = "target";
  // DI: the attribute to impute (absent from the stored record columns when
  // no dedicated label column is configured; the column doubles as gold).
  std::string target_attribute;
  // SM/EM column-name prefixes marking pair sides.
  std::string pair_left_prefix = "left_";
  std::string pair_right_prefix = "right_";
  // AVE field names.
  std::string description_field = "description";
  std::string attribute_field = "attribute";

  serializer::PromptProfile prompt;
};

struct Dataset {
  DatasetDescriptor descriptor;
  std::vector<LabeledInstance> instances;
  std::vector<Split> split_of;  // parallel to instances

  std::vector<std::size_t> indices(Split split) const;
  std::size_t size() const { return instances.size(); }
};

// Loads one CSV (RFC-4180-style quoting, header row) or line-delimited JSON
// file into validated, normalized LabeledInstances. All rows land in the
// Train split; callers assign real splits afterwards.
Dataset load_table(const std::filesystem::path& path, const DatasetDescriptor& descriptor,
                   const std::string& id_prefix = {});

// Writes the dataset back to CSV such that load_table returns the same
// instances (attribute order, labels, missing markers preserved).
void write_table(const Dataset& dataset, const std::filesystem::path& path);

// Assigns splits in place and returns the index sets {train, valid, test}.
// Provided protocols keep current assignments; seeded fractions apply a
// deterministic Fisher-Yates shuffle (mt19937_64) and cut
// floor(n*train), floor(n*valid), remainder.
std::array<std::vector<std::size_t>, 3> apply_split(Dataset& dataset);

// Built-in descriptors for the datasets the toolkit knows out of the box
// (prompt wording, domain tags, pair prefixes). File locations still come
// from the caller or a manifest.
const std::vector<DatasetDescriptor>& builtin_datasets();
DatasetDescriptor registry_lookup(const std::string& id);  // throws UnknownDataset

// Reads a dataset manifest (JSON). Starts from the registry entry when the
// id is known, then applies overrides from the manifest.
DatasetDescriptor descriptor_from_manifest(const std::filesystem::path& manifest_path);

// Loads per descriptor: provided split files or single file + seeded split.
// Paths resolve against base_dir.
Dataset load_dataset(const DatasetDescriptor& descriptor,
                     const std::filesystem::path& base_dir);

// Convenience: <data_root>/<id>/manifest.json -> load_dataset.
Dataset load_from_root(const std::filesystem::path& data_root, const std::string& id);

// Raw rectangular CSV read, returned column-wise; for headerless tables
// (column-typing inputs). has_header drops the first row.
std::vector<std::vector<std::string>> read_csv_columns(const std::filesystem::path& path,
                                                       char delimiter = ',',
                                                       bool has_header = false);

}  // namespace dpkit::ingest
