#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "gclpr/data.hpp"
#include "gclpr/error.hpp"
#include "gclpr/graphs.hpp"

namespace gclpr::csv {

/// Shortest round-trip decimal form of a finite double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Strict full-field parse; the locale never participates.
inline double parse_double(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("csv: cannot parse number '" + field + "' " + where);
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("csv: missing column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

/// RFC-style CSV: comma separated, double quotes guard embedded commas,
/// quotes (doubled) and newlines; accepts LF and CRLF line ends. The first
/// record is the header.
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    if (!any) {
      table.header = std::move(record);
      any = true;
    } else {
      table.rows.push_back(std::move(record));
    }
    record = {};
  };
  char c = 0;
  bool pending = false;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      pending = true;
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        pending = true;
        break;
      case ',':
        end_field();
        pending = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        pending = false;
        break;
      default:
        field.push_back(c);
        pending = true;
        break;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (pending) end_record();
  if (!any) throw DataError("csv: empty input");
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    if (table.rows[r].size() != table.header.size())
      throw DataError("csv: row " + std::to_string(r + 1) + " has " +
                      std::to_string(table.rows[r].size()) + " fields, expected " +
                      std::to_string(table.header.size()));
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_csv(in);
}

inline void write_field(std::ostream& out, const std::string& field) {
  const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

inline void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    write_field(out, table.header[i]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      write_field(out, row[i]);
    }
    out << '\n';
  }
}

inline void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out, table);
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// One numeric context channel assembled from one or more numeric columns.
struct NumericContextSpec {
  std::string name;
  std::vector<std::string> columns;
};

/// Maps CSV columns onto a Dataset: fitting coordinates, context channels,
/// and the optional response / row id / time columns (empty string = absent).
struct DatasetSchema {
  std::vector<std::string> z_columns;
  std::vector<NumericContextSpec> numeric_contexts;
  std::vector<std::string> label_contexts;
  std::string response;
  std::string row_id;
  std::string time;

  void validate() const {
    if (z_columns.empty()) throw ConfigError("schema: need at least one fitting column");
    for (const auto& c : numeric_contexts) {
      if (c.name.empty()) throw ConfigError("schema: numeric context needs a name");
      if (c.columns.empty())
        throw ConfigError("schema: numeric context '" + c.name + "' needs columns");
    }
  }
};

inline Dataset dataset_from_csv(const CsvTable& table, const DatasetSchema& schema,
                                bool require_response) {
  schema.validate();
  if (require_response && schema.response.empty())
    throw ConfigError("schema: a response column is required here");
  const std::size_t n = table.rows.size();
  Dataset data;
  data.z = linalg::Matrix(n, schema.z_columns.size());
  for (std::size_t j = 0; j < schema.z_columns.size(); ++j) {
    const std::size_t col = table.column(schema.z_columns[j]);
    for (std::size_t r = 0; r < n; ++r)
      data.z(r, j) = parse_double(table.rows[r][col],
                                  "in column '" + schema.z_columns[j] + "' row " +
                                      std::to_string(r + 1));
  }
  for (const auto& spec : schema.numeric_contexts) {
    ContextChannel ch;
    ch.name = spec.name;
    ch.kind = ContextChannel::Kind::numeric;
    std::vector<std::size_t> cols;
    for (const auto& c : spec.columns) cols.push_back(table.column(c));
    ch.numeric.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      ch.numeric[r].reserve(cols.size());
      for (std::size_t c : cols)
        ch.numeric[r].push_back(parse_double(
            table.rows[r][c], "in context '" + spec.name + "' row " + std::to_string(r + 1)));
    }
    data.contexts.push_back(std::move(ch));
  }
  for (const auto& name : schema.label_contexts) {
    ContextChannel ch;
    ch.name = name;
    ch.kind = ContextChannel::Kind::label;
    const std::size_t col = table.column(name);
    ch.labels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) ch.labels.push_back(table.rows[r][col]);
    data.contexts.push_back(std::move(ch));
  }
  if (!schema.response.empty() && (require_response || table.has_column(schema.response))) {
    const std::size_t col = table.column(schema.response);
    data.y.reserve(n);
    for (std::size_t r = 0; r < n; ++r)
      data.y.push_back(parse_double(table.rows[r][col],
                                    "in response row " + std::to_string(r + 1)));
  }
  if (!schema.row_id.empty()) {
    const std::size_t col = table.column(schema.row_id);
    data.row_ids.reserve(n);
    for (std::size_t r = 0; r < n; ++r) data.row_ids.push_back(table.rows[r][col]);
  }
  if (!schema.time.empty()) {
    const std::size_t col = table.column(schema.time);
    data.time.reserve(n);
    for (std::size_t r = 0; r < n; ++r)
      data.time.push_back(
          parse_double(table.rows[r][col], "in time row " + std::to_string(r + 1)));
  }
  data.validate();
  return data;
}

/// Canonical column layout for a dataset: row_id, time, z0..z{d-1}, context
/// channels (numeric channels with k > 1 components expand to name_0..),
/// then the response.
inline CsvTable dataset_to_csv(const Dataset& data) {
  data.validate();
  CsvTable table;
  const std::size_t n = data.rows();
  const bool ids = !data.row_ids.empty();
  const bool time = !data.time.empty();
  if (ids) table.header.push_back("row_id");
  if (time) table.header.push_back("time");
  for (std::size_t j = 0; j < data.dim(); ++j)
    table.header.push_back("z" + std::to_string(j));
  for (const auto& ch : data.contexts) {
    if (ch.kind == ContextChannel::Kind::label) {
      table.header.push_back(ch.name);
    } else {
      const std::size_t width = ch.numeric.empty() ? 1 : ch.numeric.front().size();
      if (width == 1)
        table.header.push_back(ch.name);
      else
        for (std::size_t c = 0; c < width; ++c)
          table.header.push_back(ch.name + "_" + std::to_string(c));
    }
  }
  if (data.has_response()) table.header.push_back("y");
  table.rows.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::string> row;
    row.reserve(table.header.size());
    if (ids) row.push_back(data.row_ids[r]);
    if (time) row.push_back(format_double(data.time[r]));
    for (std::size_t j = 0; j < data.dim(); ++j) row.push_back(format_double(data.z(r, j)));
    for (const auto& ch : data.contexts) {
      if (ch.kind == ContextChannel::Kind::label)
        row.push_back(ch.labels[r]);
      else
        for (double v : ch.numeric[r]) row.push_back(format_double(v));
    }
    if (data.has_response()) row.push_back(format_double(data.y[r]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// Schema matching the layout emitted by dataset_to_csv.
inline DatasetSchema schema_for(const Dataset& data) {
  DatasetSchema schema;
  for (std::size_t j = 0; j < data.dim(); ++j)
    schema.z_columns.push_back("z" + std::to_string(j));
  for (const auto& ch : data.contexts) {
    if (ch.kind == ContextChannel::Kind::label) {
      schema.label_contexts.push_back(ch.name);
    } else {
      NumericContextSpec spec;
      spec.name = ch.name;
      const std::size_t width = ch.numeric.empty() ? 1 : ch.numeric.front().size();
      if (width == 1)
        spec.columns.push_back(ch.name);
      else
        for (std::size_t c = 0; c < width; ++c)
          spec.columns.push_back(ch.name + "_" + std::to_string(c));
      schema.numeric_contexts.push_back(std::move(spec));
    }
  }
  if (data.has_response()) schema.response = "y";
  if (!data.row_ids.empty()) schema.row_id = "row_id";
  if (!data.time.empty()) schema.time = "time";
  return schema;
}

/// Edge list with columns src,dst[,weight]; missing weight means 1.
inline graphs::Graph graph_from_csv(const CsvTable& table) {
  const std::size_t src = table.column("src");
  const std::size_t dst = table.column("dst");
  const bool weighted = table.has_column("weight");
  const std::size_t w = weighted ? table.column("weight") : 0;
  graphs::Graph g;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double weight =
        weighted ? parse_double(table.rows[r][w], "in weight row " + std::to_string(r + 1))
                 : 1.0;
    g.add_edge(table.rows[r][src], table.rows[r][dst], weight);
  }
  return g;
}

/// Each undirected edge once, endpoints in index order.
inline CsvTable graph_to_csv(const graphs::Graph& g) {
  CsvTable table;
  table.header = {"src", "dst", "weight"};
  for (std::size_t u = 0; u < g.ids().size(); ++u)
    for (const auto& [v, w] : g.neighbors(u))
      if (static_cast<std::size_t>(v) > u)
        table.rows.push_back({g.id_of(u), g.id_of(static_cast<std::size_t>(v)),
                              format_double(w)});
  return table;
}

}  // namespace gclpr::csv
