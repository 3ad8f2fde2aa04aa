#pragma once

// CSV and JSON-sidecar I/O for datasets, masks and matrices.
//
// CSV: comma separated, one header row, "NA"/"NaN" (any case) or an empty
// field marks a missing cell. Floats are written with 17 significant digits
// so a write/read round trip is exact.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sdai/data.hpp"

namespace sdai {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(s.find_last_not_of(ws) + 1);
  s.erase(0, s.find_first_not_of(ws));
  return s;
}

inline bool is_missing_token(const std::string& t) {
  if (t.empty()) return true;
  std::string lower;
  for (char c : t) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "na" || lower == "nan";
}

inline bool parse_double(const std::string& t, double& out) {
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace detail

/// Formats with 17 significant digits (round-trip exact).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline TabularDataset read_csv(std::istream& in, const Schema& schema) {
  validate_schema(schema);
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV is empty (missing header row)");
  const auto header = detail::split_csv_line(line);
  if (header.size() != schema.size())
    throw DataError("CSV header has " + std::to_string(header.size()) + " columns, schema has " +
                    std::to_string(schema.size()));
  for (std::size_t c = 0; c < header.size(); ++c)
    if (detail::trim(header[c]) != schema[c].name)
      throw DataError("CSV header column " + std::to_string(c + 1) + " is '" +
                      detail::trim(header[c]) + "', schema expects '" + schema[c].name + "'");

  std::vector<std::unordered_map<std::string, std::size_t>> label_index(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c)
    for (std::size_t k = 0; k < schema[c].labels.size(); ++k) label_index[c][schema[c].labels[k]] = k;

  std::vector<double> values;
  std::vector<bool> missing;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = "row " + std::to_string(row + 1) + " (line " + std::to_string(line_no) + ")";
    if (fields.size() != schema.size())
      throw DataError(where + ": expected " + std::to_string(schema.size()) + " fields, found " +
                      std::to_string(fields.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::string token = detail::trim(fields[c]);
      const std::string at = where + ", column '" + schema[c].name + "'";
      if (detail::is_missing_token(token)) {
        values.push_back(0.0);
        missing.push_back(true);
        continue;
      }
      double v = 0.0;
      switch (schema[c].kind) {
        case ColumnKind::Continuous:
          if (!detail::parse_double(token, v)) throw DataError(at + ": non-numeric value '" + token + "'");
          break;
        case ColumnKind::Binary:
          if (!detail::parse_double(token, v)) throw DataError(at + ": non-numeric value '" + token + "'");
          if (v != 0.0 && v != 1.0) throw DataError(at + ": binary value must be 0 or 1, got '" + token + "'");
          break;
        case ColumnKind::Categorical: {
          auto it = label_index[c].find(token);
          if (it == label_index[c].end()) throw DataError(at + ": unknown category label '" + token + "'");
          v = static_cast<double>(it->second);
          break;
        }
      }
      values.push_back(v);
      missing.push_back(false);
    }
    ++row;
  }
  auto ds = make_dataset(schema, row);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i / schema.size());
    const auto c = static_cast<Eigen::Index>(i % schema.size());
    ds.cells(r, c) = values[i];
    ds.missing(r, c) = missing[i];
  }
  return ds;
}

inline TabularDataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

inline void write_csv(std::ostream& out, const TabularDataset& ds) {
  for (std::size_t c = 0; c < ds.n_columns(); ++c)
    out << (c ? "," : "") << detail::quote_if_needed(ds.schema[c].name);
  out << '\n';
  for (std::size_t r = 0; r < ds.n_samples(); ++r) {
    for (std::size_t c = 0; c < ds.n_columns(); ++c) {
      if (c) out << ',';
      if (ds.missing(r, c)) {
        out << "NA";
        continue;
      }
      const double v = ds.cells(r, c);
      switch (ds.schema[c].kind) {
        case ColumnKind::Continuous: out << format_double(v); break;
        case ColumnKind::Binary: out << (v == 1.0 ? "1" : "0"); break;
        case ColumnKind::Categorical:
          out << detail::quote_if_needed(ds.schema[c].labels[static_cast<std::size_t>(v)]);
          break;
      }
    }
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const TabularDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, ds);
}

// ---------------------------------------------------------------------------
// Schema sidecar: [{"name": ..., "kind": ..., "labels": [...]}, ...]

inline nlohmann::json schema_to_json(const Schema& schema) {
  auto arr = nlohmann::json::array();
  for (const auto& c : schema) {
    nlohmann::json j{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
    if (c.kind == ColumnKind::Categorical) j["labels"] = c.labels;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Schema schema_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("schema must be a JSON array");
  Schema schema;
  for (const auto& e : j) {
    if (!e.contains("name") || !e.contains("kind")) throw DataError("schema entry needs 'name' and 'kind'");
    ColumnSchema c;
    c.name = e.at("name").get<std::string>();
    c.kind = column_kind_from_string(e.at("kind").get<std::string>());
    if (e.contains("labels")) c.labels = e.at("labels").get<std::vector<std::string>>();
    schema.push_back(std::move(c));
  }
  validate_schema(schema);
  return schema;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema '" + path + "': " + e.what());
  }
}

inline void save_schema(const std::string& path, const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << schema_to_json(schema).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Masks and matrices

inline void write_mask_csv(std::ostream& out, const Mask& mask, const Schema* schema = nullptr) {
  if (schema) {
    for (std::size_t c = 0; c < schema->size(); ++c)
      out << (c ? "," : "") << detail::quote_if_needed((*schema)[c].name);
    out << '\n';
  }
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) out << (c ? "," : "") << (mask(r, c) ? '1' : '0');
    out << '\n';
  }
}

/// Reads a 0/1 mask CSV, with or without a header row.
inline Mask read_mask_csv(std::istream& in) {
  std::vector<std::vector<bool>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    std::vector<bool> row;
    bool numeric = true;
    for (const auto& f : fields) {
      const auto t = detail::trim(f);
      if (t == "0" || t == "1")
        row.push_back(t == "1");
      else
        numeric = false;
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw DataError("mask CSV: non 0/1 entry on data line");
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError("mask CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  Mask m(static_cast<Eigen::Index>(rows.size()),
         rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

/// Binary PGM (P5) of one height x width mask; missing pixels are black.
inline void write_mask_pgm(std::ostream& out, std::span<const bool> pixels, std::size_t height,
                           std::size_t width) {
  if (pixels.size() != height * width) throw InvalidArgument("PGM: pixel count does not match shape");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (bool missing : pixels) out.put(missing ? static_cast<char>(0) : static_cast<char>(255));
}

inline void write_matrix_csv(std::ostream& out, const DenseMatrix& m,
                             const std::vector<std::string>& header = {}) {
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << detail::quote_if_needed(header[c]);
  if (!header.empty()) out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

/// Column names of the encoded layout ("col" or "col=label").
inline std::vector<std::string> encoded_column_names(const Schema& schema) {
  std::vector<std::string> names;
  for (const auto& c : schema) {
    if (c.kind == ColumnKind::Categorical)
      for (const auto& l : c.labels) names.push_back(c.name + "=" + l);
    else
      names.push_back(c.name);
  }
  return names;
}

}  // namespace sdai
