#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bvgae/attribution.hpp"
#include "bvgae/graph.hpp"
#include "bvgae/simulate.hpp"

namespace bvgae {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header field; throws IoError naming `source` when absent.
  std::size_t column(std::string_view name, const std::string& source) const;
};

// Comma-separated, first line is the header. Double-quoted fields may hold
// commas and doubled quotes.
CsvTable parse_csv(std::string_view text, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

// Shortest decimal text that round-trips the double.
std::string format_double(double v);
double parse_double(std::string_view text, const std::string& context);

std::string csv_escape(std::string_view field);
void write_text(const std::filesystem::path& path, std::string_view text);

// Maps string IDs to contiguous indices in first-seen order.
class IdIndex {
 public:
  int insert(const std::string& id);
  std::optional<int> find(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
};

struct LoadedGraph {
  BipartiteGraph graph;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::vector<std::string> feature_names;  // X1 columns
  std::optional<PlantAssignment> plants;
  std::vector<std::string> plant_ids;
};

// Edge list `row_id,col_id`. Row covariates keyed by `row_id` fix the row
// universe and order when given; column covariates keyed by `col_id` do the
// same for columns, otherwise X2 = 1. Plants CSV is `row_id,plant_id`.
LoadedGraph load_graph(const std::filesystem::path& edges, const std::optional<std::filesystem::path>& row_covariates,
                       const std::optional<std::filesystem::path>& col_covariates,
                       const std::optional<std::filesystem::path>& plants);

// Row labels `row_id,group` aligned to `row_ids`; groups take names in
// first-seen order.
GroupPartition load_groups(const std::filesystem::path& path, const std::vector<std::string>& row_ids);

// Dataset directory layout shared by simulate, ingest, train and attribute.
struct DatasetFiles {
  static constexpr const char* kEdges = "edges.csv";
  static constexpr const char* kRowCovariates = "covariates.csv";
  static constexpr const char* kColCovariates = "col_covariates.csv";
  static constexpr const char* kPlants = "plants.csv";
  static constexpr const char* kGroups = "groups.csv";
  static constexpr const char* kGroundTruth = "ground_truth.csv";
  static constexpr const char* kProtected = "protected.csv";
};

std::string row_id(Eigen::Index i);
std::string col_id(Eigen::Index j);

std::string edges_csv(const Matrix& incidence, const std::vector<std::string>& row_ids,
                      const std::vector<std::string>& col_ids);
std::string matrix_csv(std::string_view key, const std::vector<std::string>& ids,
                       const std::vector<std::string>& names, const Matrix& values);
std::string ground_truth_csv(const GroundTruth& truth, const GroupPartition& partition);

// Writes edges, covariates, column covariates, groups, ground truth and,
// for study 2, plants into `dir`. Returns the written file names.
std::vector<std::string> write_dataset(const std::filesystem::path& dir, const SimulatedData& data);

struct SpipollData {
  BipartiteGraph graph;
  PlantAssignment plants;
  Vector protected_column;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::vector<std::string> plant_ids;
  std::vector<std::string> feature_names;
  std::vector<std::string> dropped_clc;
};

// sessions: `row_id,col_id`; covariates: `row_id,plant_id,user_id,day,year,
// delta_t`; clc: `row_id,<category>...` proportions. X1 = [P | day | year |
// delta_t | kept CLC], continuous columns standardized. A CLC column is kept
// when its proportion exceeds 0.10 in at least 5% of sessions. The protected
// column counts, per user, the sessions up to and including this one in
// (year, day, file) order.
SpipollData spipoll_ingest(const std::filesystem::path& sessions, const std::filesystem::path& covariates,
                           const std::filesystem::path& clc);

// Column-wise (x - mean) / sd with the population sd; constant columns
// become 0.
void standardize_columns(Matrix& x);

}  // namespace bvgae
