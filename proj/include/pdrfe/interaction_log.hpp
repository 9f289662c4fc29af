#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdrfe/edge_encoder.hpp"
#include "pdrfe/graph.hpp"

namespace pdrfe {

/// One row of an interaction log: columns cid, sid, utterance, defect ∈ {0,1}.
struct InteractionRow {
  std::string cid;
  std::string sid;
  std::string utterance;
  int defect = 0;
};

/// Reads a log. Format follows the extension: `.jsonl` holds one JSON object per
/// line; `.tsv` is tab-delimited; anything else is comma-delimited with RFC 4180
/// quoting. Delimited files need a header naming cid, sid, utterance and defect
/// (any order, extra columns ignored). Violations throw std::runtime_error with the
/// line number.
std::vector<InteractionRow> load_interaction_log(const std::filesystem::path& path);
void write_interaction_log(const std::filesystem::path& path,
                           const std::vector<InteractionRow>& rows);

/// Stable string → dense index map; indices follow insertion order.
class IdMap {
 public:
  std::size_t intern(const std::string& id);
  std::size_t at(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> ids_;
};

/// Categorical node metadata: one row per node id, one column per attribute.
struct CategoricalTable {
  std::vector<std::string> columns;
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> values;  // [row][column]
};

CategoricalTable load_categorical_table(const std::filesystem::path& path);
void write_categorical_table(const std::filesystem::path& path, const CategoricalTable& table);

/// One-hot encodes every column (levels in first-appearance order) and concatenates,
/// producing one row per id in `order`. Ids absent from the table get zero rows.
Tensor one_hot(const CategoricalTable& table, const IdMap& order);

struct IndexedLog {
  IdMap customers;
  IdMap skills;
  std::vector<InteractionRecord> records;
};

/// Resolves string ids to indices (first-appearance order unless maps are given
/// pre-populated) and encodes utterances.
IndexedLog index_log(const std::vector<InteractionRow>& rows, const EdgeEncoder& encoder,
                     IdMap customers = {}, IdMap skills = {});

// Splits one delimited line into fields, honoring double-quote escaping.
std::vector<std::string> split_delimited(const std::string& line, char delim);

}  // namespace pdrfe
