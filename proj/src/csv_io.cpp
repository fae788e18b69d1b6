#include "derids/csv_io.hpp"

#include "derids/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>

namespace derids {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError("not a number: '" + std::string(field) + "'", line);
  if (!std::isfinite(value)) throw ParseError("non-finite value", line);
  return value;
}

long long parse_int(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  long long value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError("not an integer: '" + std::string(field) + "'", line);
  return value;
}

std::vector<std::string> feature_names(Eigen::Index dim) {
  if (dim == 4) return {"p_L", "q_L", "p_Dmax"};
  std::vector<std::string> names;
  for (Eigen::Index j = 1; j < dim; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::string>> rows;  // (line number, text)
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (table.header.empty()) {
      for (auto f : split(t)) table.header.emplace_back(trim(f));
      continue;
    }
    table.rows.emplace_back(line_no, std::string(t));
  }
  if (table.header.empty() || table.rows.empty()) throw SchemaError("empty dataset");
  return table;
}

Dataset parse_dataset(const Table& table, std::optional<DatasetKind> expected) {
  const auto& h = table.header;
  const bool has_y = h.back() == "y";
  const DatasetKind kind = has_y ? DatasetKind::labeled : DatasetKind::unlabeled;
  if (expected && *expected != kind)
    throw SchemaError("expected a " + std::string(to_string(*expected)) + " dataset, header has " +
                      (has_y ? "a" : "no") + " y column");
  const std::size_t p_col = h.size() - (has_y ? 2 : 1);
  if (h.size() < (has_y ? 3u : 2u) || h[p_col] != "p")
    throw SchemaError("header must end with 'p' (or 'p,y') after the feature columns");
  const bool explicit_intercept = h.front() == "intercept";
  const std::size_t n_feat = p_col;
  const auto dim = static_cast<Eigen::Index>(explicit_intercept ? n_feat : n_feat + 1);
  if (dim < 2) throw SchemaError("dataset needs at least one feature column");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Matrix x(n, dim);
  Vector p(n);
  std::vector<Label> y;
  if (has_y) y.reserve(table.rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [line_no, text] = table.rows[static_cast<std::size_t>(i)];
    const auto fields = split(text);
    if (fields.size() != h.size())
      throw SchemaError("line " + std::to_string(line_no) + ": dimension mismatch, expected " +
                        std::to_string(h.size()) + " fields, found " + std::to_string(fields.size()));
    Eigen::Index col = 0;
    if (!explicit_intercept) x(i, col++) = 1.0;
    for (std::size_t j = 0; j < n_feat; ++j) x(i, col++) = parse_double(fields[j], line_no);
    if (explicit_intercept && x(i, 0) != 1.0)
      throw SchemaError("line " + std::to_string(line_no) + ": intercept column must be 1");
    p[i] = parse_double(fields[p_col], line_no);
    if (has_y) {
      try {
        y.push_back(label_from_int(parse_int(fields.back(), line_no)));
      } catch (const SchemaError& e) {
        throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  return has_y ? Dataset::labeled(std::move(x), std::move(p), std::move(y))
               : Dataset::unlabeled(std::move(x), std::move(p));
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetKind kind) {
  return parse_dataset(read_table(path), kind);
}

Dataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_table(path), std::nullopt);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const auto& x = ds.features();
  const auto& p = ds.commands();
  if (!x.allFinite() || !p.allFinite()) throw SchemaError("refusing to write non-finite values");
  std::ostringstream out;
  for (const auto& name : feature_names(ds.dim())) out << name << ',';
  out << 'p' << (ds.is_labeled() ? ",y" : "") << '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 1; j < ds.dim(); ++j) out << format_double(x(i, j)) << ',';
    out << format_double(p[i]);
    if (ds.is_labeled()) out << ',' << to_int(ds.labels()[static_cast<std::size_t>(i)]);
    out << '\n';
  }
  write_text_file(path, out.str());
}

void save_index_set(const std::vector<std::size_t>& indices, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "idx\n";
  for (auto i : indices) out << i << '\n';
  write_text_file(path, out.str());
}

std::vector<std::size_t> load_index_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> out;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || (line_no == 1 && t == "idx")) continue;
    const auto v = parse_int(t, line_no);
    if (v < 0) throw ParseError("negative index", line_no);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace derids
