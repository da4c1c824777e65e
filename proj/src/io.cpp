#include "bvgae/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace bvgae {

namespace fs = std::filesystem;

std::size_t CsvTable::column(std::string_view name, const std::string& source) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError(source + ": missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_record(std::string_view line, const std::string& where) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw IoError(where + ": unterminated quote");
  out.push_back(std::move(field));
  return out;
}

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_record(line, source + ":" + std::to_string(line_no));
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw IoError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                    " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw IoError(source + ": empty file");
  return table;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text == "nan" || text == "NaN") return std::nan("");
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw IoError(context + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

int IdIndex::insert(const std::string& id) {
  const auto [it, inserted] = index_.emplace(id, static_cast<int>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<int> IdIndex::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

struct KeyedMatrix {
  IdIndex ids;
  std::vector<std::string> names;
  Matrix values;
};

KeyedMatrix read_keyed_matrix(const fs::path& path, std::string_view key) {
  const CsvTable t = read_csv(path);
  const std::size_t k = t.column(key, path.string());
  KeyedMatrix out;
  std::vector<std::size_t> value_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == k) continue;
    value_cols.push_back(c);
    out.names.push_back(t.header[c]);
  }
  out.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(value_cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (out.ids.find(row[k])) throw IoError(path.string() + ": duplicate " + std::string(key) + " '" + row[k] + "'");
    out.ids.insert(row[k]);
    for (std::size_t c = 0; c < value_cols.size(); ++c) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(row[value_cols[c]], path.string() + ":" + std::to_string(r + 2));
    }
  }
  return out;
}

}  // namespace

LoadedGraph load_graph(const fs::path& edges, const std::optional<fs::path>& row_covariates,
                       const std::optional<fs::path>& col_covariates, const std::optional<fs::path>& plants) {
  const CsvTable e = read_csv(edges);
  const std::size_t rc = e.column("row_id", edges.string());
  const std::size_t cc = e.column("col_id", edges.string());

  std::optional<KeyedMatrix> rows_cov;
  std::optional<KeyedMatrix> cols_cov;
  if (row_covariates) rows_cov = read_keyed_matrix(*row_covariates, "row_id");
  if (col_covariates) cols_cov = read_keyed_matrix(*col_covariates, "col_id");
  IdIndex row_index = rows_cov ? rows_cov->ids : IdIndex{};
  IdIndex col_index = cols_cov ? cols_cov->ids : IdIndex{};

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(e.rows.size());
  for (std::size_t r = 0; r < e.rows.size(); ++r) {
    const auto& row = e.rows[r];
    int i, j;
    if (rows_cov) {
      const auto found = row_index.find(row[rc]);
      if (!found) throw IoError(edges.string() + ":" + std::to_string(r + 2) + ": row '" + row[rc] + "' has no covariates");
      i = *found;
    } else {
      i = row_index.insert(row[rc]);
    }
    if (cols_cov) {
      const auto found = col_index.find(row[cc]);
      if (!found) throw IoError(edges.string() + ":" + std::to_string(r + 2) + ": column '" + row[cc] + "' has no covariates");
      j = *found;
    } else {
      j = col_index.insert(row[cc]);
    }
    pairs.emplace_back(i, j);
  }

  const Eigen::Index n1 = row_index.size();
  const Eigen::Index n2 = col_index.size();
  Matrix b = Matrix::Zero(n1, n2);
  for (const auto& [i, j] : pairs) b(i, j) = 1.0;

  LoadedGraph out;
  out.row_ids = row_index.ids();
  out.col_ids = col_index.ids();
  Matrix x1 = rows_cov ? rows_cov->values : Matrix::Ones(n1, 1);
  out.feature_names = rows_cov ? rows_cov->names : std::vector<std::string>{"ones"};
  Matrix x2 = cols_cov ? cols_cov->values : Matrix::Ones(n2, 1);

  if (plants) {
    const CsvTable p = read_csv(*plants);
    const std::size_t pr = p.column("row_id", plants->string());
    const std::size_t pp = p.column("plant_id", plants->string());
    IdIndex plant_index;
    std::vector<int> labels(static_cast<std::size_t>(n1), -1);
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      const auto found = row_index.find(p.rows[r][pr]);
      if (!found) throw IoError(plants->string() + ":" + std::to_string(r + 2) + ": unknown row '" + p.rows[r][pr] + "'");
      if (p.rows[r][pp].empty()) throw IoError(plants->string() + ":" + std::to_string(r + 2) + ": empty plant_id");
      labels[static_cast<std::size_t>(*found)] = plant_index.insert(p.rows[r][pp]);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) throw IoError(plants->string() + ": no plant for row '" + out.row_ids[i] + "'");
    }
    out.plants = PlantAssignment(std::move(labels), plant_index.size());
    out.plant_ids = plant_index.ids();
  }
  out.graph = BipartiteGraph(std::move(b), std::move(x1), std::move(x2));
  return out;
}

GroupPartition load_groups(const fs::path& path, const std::vector<std::string>& row_ids) {
  const CsvTable t = read_csv(path);
  const std::size_t rc = t.column("row_id", path.string());
  const std::size_t gc = t.column("group", path.string());
  std::unordered_map<std::string, std::string> group_of;
  for (const auto& row : t.rows) group_of[row[rc]] = row[gc];
  IdIndex groups;
  std::vector<int> labels;
  labels.reserve(row_ids.size());
  for (const auto& id : row_ids) {
    const auto it = group_of.find(id);
    if (it == group_of.end()) throw IoError(path.string() + ": no group for row '" + id + "'");
    labels.push_back(groups.insert(it->second));
  }
  return GroupPartition(std::move(labels), groups.size(), groups.ids());
}

std::string row_id(Eigen::Index i) { return "r" + std::to_string(i + 1); }
std::string col_id(Eigen::Index j) { return "c" + std::to_string(j + 1); }

std::string edges_csv(const Matrix& incidence, const std::vector<std::string>& row_ids,
                      const std::vector<std::string>& col_ids) {
  std::string out = "row_id,col_id\n";
  for (Eigen::Index i = 0; i < incidence.rows(); ++i) {
    for (Eigen::Index j = 0; j < incidence.cols(); ++j) {
      if (incidence(i, j) != 0.0) {
        out += csv_escape(row_ids[static_cast<std::size_t>(i)]) + ',' + csv_escape(col_ids[static_cast<std::size_t>(j)]) + '\n';
      }
    }
  }
  return out;
}

std::string matrix_csv(std::string_view key, const std::vector<std::string>& ids, const std::vector<std::string>& names,
                       const Matrix& values) {
  std::string out(key);
  for (const auto& n : names) out += ',' + csv_escape(n);
  out += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += csv_escape(ids[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < values.cols(); ++c) out += ',' + format_double(values(r, c));
    out += '\n';
  }
  return out;
}

std::string ground_truth_csv(const GroundTruth& truth, const GroupPartition& partition) {
  std::string out = "group,feature,expected_sign,is_signal\n";
  for (Eigen::Index k = 0; k < truth.evaluated.rows(); ++k) {
    for (Eigen::Index j = 0; j < truth.evaluated.cols(); ++j) {
      if (truth.evaluated(k, j) == 0.0) continue;
      out += csv_escape(partition.name(static_cast<int>(k))) + ',' +
             csv_escape(truth.feature_names[static_cast<std::size_t>(j)]) + ',' +
             std::to_string(static_cast<int>(truth.expected_sign(k, j))) + ',' +
             std::to_string(static_cast<int>(truth.signal_mask(k, j))) + '\n';
    }
  }
  return out;
}

std::vector<std::string> write_dataset(const fs::path& dir, const SimulatedData& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const BipartiteGraph& g = data.graph;
  std::vector<std::string> rows(static_cast<std::size_t>(g.n1()));
  std::vector<std::string> cols(static_cast<std::size_t>(g.n2()));
  for (Eigen::Index i = 0; i < g.n1(); ++i) rows[static_cast<std::size_t>(i)] = row_id(i);
  for (Eigen::Index j = 0; j < g.n2(); ++j) cols[static_cast<std::size_t>(j)] = col_id(j);

  std::vector<std::string> written;
  auto emit = [&](const char* name, const std::string& text) {
    write_text(dir / name, text);
    written.emplace_back(name);
  };
  emit(DatasetFiles::kEdges, edges_csv(g.incidence, rows, cols));
  emit(DatasetFiles::kRowCovariates, matrix_csv("row_id", rows, data.truth.feature_names, g.x1));
  std::vector<std::string> x2_names;
  for (Eigen::Index c = 0; c < g.d2(); ++c) x2_names.push_back(c == 0 && g.d2() == 1 ? "ones" : "x2_" + std::to_string(c + 1));
  emit(DatasetFiles::kColCovariates, matrix_csv("col_id", cols, x2_names, g.x2));

  std::string groups = "row_id,group\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    groups += rows[i] + ',' + csv_escape(data.partition.name(data.partition.labels[i])) + '\n';
  }
  emit(DatasetFiles::kGroups, groups);
  emit(DatasetFiles::kGroundTruth, ground_truth_csv(data.truth, data.partition));
  if (data.plants) {
    std::string plants = "row_id,plant_id\n";
    for (std::size_t i = 0; i < rows.size(); ++i) plants += rows[i] + ',' + std::to_string(data.plants->labels()[i] + 1) + '\n';
    emit(DatasetFiles::kPlants, plants);
  }
  return written;
}

void standardize_columns(Matrix& x) {
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    x.col(c).array() -= mean;
    const double sd = std::sqrt(x.col(c).squaredNorm() / n);
    if (sd > 0.0) {
      x.col(c) /= sd;
    } else {
      x.col(c).setZero();
    }
  }
}

SpipollData spipoll_ingest(const fs::path& sessions, const fs::path& covariates, const fs::path& clc) {
  const CsvTable s = read_csv(sessions);
  const std::size_t sr = s.column("row_id", sessions.string());
  const std::size_t sc = s.column("col_id", sessions.string());
  IdIndex row_index, col_index;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& row : s.rows) pairs.emplace_back(row_index.insert(row[sr]), col_index.insert(row[sc]));
  const Eigen::Index n1 = row_index.size();
  const Eigen::Index n2 = col_index.size();
  if (n1 == 0) throw IoError(sessions.string() + ": no sessions");

  const CsvTable cov = read_csv(covariates);
  const std::string cname = covariates.string();
  const std::size_t c_row = cov.column("row_id", cname), c_plant = cov.column("plant_id", cname),
                    c_user = cov.column("user_id", cname), c_day = cov.column("day", cname),
                    c_year = cov.column("year", cname), c_dt = cov.column("delta_t", cname);
  std::vector<int> cov_row(static_cast<std::size_t>(n1), -1);
  for (std::size_t r = 0; r < cov.rows.size(); ++r) {
    const auto found = row_index.find(cov.rows[r][c_row]);
    if (!found) throw IoError(cname + ":" + std::to_string(r + 2) + ": unknown session '" + cov.rows[r][c_row] + "'");
    cov_row[static_cast<std::size_t>(*found)] = static_cast<int>(r);
  }
  for (Eigen::Index i = 0; i < n1; ++i) {
    if (cov_row[static_cast<std::size_t>(i)] < 0) {
      throw IoError(cname + ": missing covariates for session '" + row_index.ids()[static_cast<std::size_t>(i)] + "'");
    }
  }

  SpipollData out;
  IdIndex plant_index;
  std::vector<int> plant_of(static_cast<std::size_t>(n1));
  Matrix continuous(n1, 3);
  std::vector<std::string> users(static_cast<std::size_t>(n1));
  for (Eigen::Index i = 0; i < n1; ++i) {
    const int r = cov_row[static_cast<std::size_t>(i)];
    const auto& row = cov.rows[static_cast<std::size_t>(r)];
    const std::string where = cname + ":" + std::to_string(r + 2);
    if (row[c_plant].empty()) throw IoError(where + ": unknown plant label ''");
    plant_of[static_cast<std::size_t>(i)] = plant_index.insert(row[c_plant]);
    continuous(i, 0) = parse_double(row[c_day], where);
    continuous(i, 1) = parse_double(row[c_year], where);
    continuous(i, 2) = parse_double(row[c_dt], where);
    users[static_cast<std::size_t>(i)] = row[c_user];
  }

  // Participation count per user in chronological order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n1));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (continuous(a, 1) != continuous(b, 1)) return continuous(a, 1) < continuous(b, 1);
    if (continuous(a, 0) != continuous(b, 0)) return continuous(a, 0) < continuous(b, 0);
    return cov_row[static_cast<std::size_t>(a)] < cov_row[static_cast<std::size_t>(b)];
  });
  out.protected_column.resize(n1);
  std::unordered_map<std::string, int> seen;
  for (Eigen::Index i : order) out.protected_column(i) = ++seen[users[static_cast<std::size_t>(i)]];

  const KeyedMatrix land = read_keyed_matrix(clc, "row_id");
  Matrix clc_values(n1, land.values.cols());
  for (Eigen::Index i = 0; i < n1; ++i) {
    const auto found = land.ids.find(row_index.ids()[static_cast<std::size_t>(i)]);
    if (!found) throw IoError(clc.string() + ": missing land cover for session '" + row_index.ids()[static_cast<std::size_t>(i)] + "'");
    clc_values.row(i) = land.values.row(*found);
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < clc_values.cols(); ++c) {
    const auto above = (clc_values.col(c).array() > 0.10).count();
    if (static_cast<double>(above) >= 0.05 * static_cast<double>(n1)) {
      kept.push_back(c);
    } else {
      out.dropped_clc.push_back(land.names[static_cast<std::size_t>(c)]);
    }
  }

  out.plants = PlantAssignment(std::move(plant_of), plant_index.size());
  const Matrix p = out.plants.one_hot();
  const Eigen::Index d1 = p.cols() + 3 + static_cast<Eigen::Index>(kept.size());
  Matrix cont(n1, 3 + static_cast<Eigen::Index>(kept.size()));
  cont.leftCols(3) = continuous;
  for (std::size_t k = 0; k < kept.size(); ++k) cont.col(3 + static_cast<Eigen::Index>(k)) = clc_values.col(kept[k]);
  standardize_columns(cont);
  Matrix x1(n1, d1);
  x1 << p, cont;

  for (const auto& id : plant_index.ids()) out.feature_names.push_back("plant:" + id);
  out.feature_names.insert(out.feature_names.end(), {"day", "year", "delta_t"});
  for (Eigen::Index c : kept) out.feature_names.push_back(land.names[static_cast<std::size_t>(c)]);

  Matrix b = Matrix::Zero(n1, n2);
  for (const auto& [i, j] : pairs) b(i, j) = 1.0;
  out.graph = BipartiteGraph(std::move(b), std::move(x1), Matrix::Ones(n2, 1));
  out.row_ids = row_index.ids();
  out.col_ids = col_index.ids();
  out.plant_ids = plant_index.ids();
  return out;
}

}  // namespace bvgae
