#include "malclass/corpus.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "malclass/errors.hpp"

namespace malclass {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

// Calls fn(line, 1-based line number) for each line, without the newline.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, ++number);
    pos = end + 1;
  }
}

std::string category_of(const std::string& column) {
  const auto us = column.find('_');
  return us == std::string::npos ? column : column.substr(0, us);
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

bool Manifest::labeled() const {
  for (const auto& e : entries)
    if (!e.label) return false;
  return true;
}

std::vector<int> Manifest::zero_based_labels() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (!e.label) throw DataError("sample '" + e.id + "' has no class label");
    out.push_back(*e.label - 1);
  }
  return out;
}

std::vector<std::string> Manifest::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

namespace {

struct SampleDirs {
  std::filesystem::path bytes_dir;
  std::filesystem::path asm_dir;
};

Manifest read_manifest(const std::filesystem::path& path, const std::optional<SampleDirs>& dirs, int class_count) {
  if (class_count < 2) throw DataError("class count must be at least 2");
  const std::string text = read_text_file(path);
  Manifest manifest;
  manifest.class_count = class_count;
  bool has_class = false;
  bool seen_header = false;
  std::set<std::string> ids;

  for_each_line(text, [&](std::string_view line, std::size_t number) {
    if (trim(line).empty()) return;
    const auto fields = split_csv(line);
    if (!seen_header) {
      seen_header = true;
      if (unquote(fields[0]) != "Id" || fields.size() > 2 || (fields.size() == 2 && unquote(fields[1]) != "Class"))
        throw ParseError("manifest header must be 'Id,Class' or 'Id'", number);
      has_class = fields.size() == 2;
      return;
    }
    if (fields.size() != (has_class ? 2u : 1u)) throw ParseError("wrong number of fields", number);
    SampleRef ref;
    ref.id = std::string(unquote(fields[0]));
    if (ref.id.empty()) throw ParseError("empty sample id", number);
    if (!ids.insert(ref.id).second) throw ParseError("duplicate sample id '" + ref.id + "'", number);
    if (has_class) {
      const auto field = unquote(fields[1]);
      int label = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), label);
      if (ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError("class label is not an integer: '" + std::string(field) + "'", number);
      if (label < 1 || label > class_count)
        throw ParseError("class label " + std::to_string(label) + " of '" + ref.id + "' outside 1.." +
                             std::to_string(class_count),
                         number);
      ref.label = label;
    }
    if (dirs) {
      ref.bytes_path = dirs->bytes_dir / (ref.id + ".bytes");
      ref.asm_path = dirs->asm_dir / (ref.id + ".asm");
      if (!std::filesystem::exists(ref.bytes_path) && !std::filesystem::exists(ref.asm_path))
        throw ParseError("neither .bytes nor .asm file exists for sample '" + ref.id + "'", number);
    }
    manifest.entries.push_back(std::move(ref));
  });
  if (!seen_header) throw DataError("manifest '" + path.string() + "' is empty");
  return manifest;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path, const std::filesystem::path& bytes_dir,
                       const std::filesystem::path& asm_dir, int class_count) {
  return read_manifest(path, SampleDirs{bytes_dir, asm_dir}, class_count);
}

Manifest load_manifest_labels(const std::filesystem::path& path, int class_count) {
  return read_manifest(path, std::nullopt, class_count);
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::string out = manifest.labeled() ? "Id,Class\n" : "Id\n";
  for (const auto& e : manifest.entries) {
    out += e.id;
    if (manifest.labeled()) out += "," + std::to_string(*e.label);
    out += "\n";
  }
  write_text_file(path, out);
}

std::vector<std::string> FeatureMatrix::column_categories() const {
  std::vector<std::string> out;
  out.reserve(column_names.size());
  for (const auto& c : column_names) out.push_back(category_of(c));
  return out;
}

void FeatureMatrix::validate() const {
  if (values.rows() != sample_ids.size())
    throw InvariantError("feature matrix has " + std::to_string(values.rows()) + " rows but " +
                         std::to_string(sample_ids.size()) + " sample ids");
  if (values.cols() != column_names.size())
    throw InvariantError("feature matrix has " + std::to_string(values.cols()) + " columns but " +
                         std::to_string(column_names.size()) + " names");
  std::vector<std::string> cats;
  for (const auto& c : column_categories())
    if (cats.empty() || cats.back() != c) cats.push_back(c);
  if (cats != category_ids) throw InvariantError("feature matrix category ids do not match its column names");
  for (double v : values.values())
    if (!std::isfinite(v)) throw InvariantError("feature matrix holds a non-finite value");
}

FeatureMatrix FeatureMatrix::hconcat(std::span<const FeatureMatrix> parts) {
  FeatureMatrix out;
  if (parts.empty()) return out;
  out.sample_ids = parts.front().sample_ids;
  std::vector<const Matrix*> blocks;
  for (const auto& p : parts) {
    if (p.sample_ids != out.sample_ids) throw DataError("cannot concatenate feature files with different samples");
    out.category_ids.insert(out.category_ids.end(), p.category_ids.begin(), p.category_ids.end());
    out.column_names.insert(out.column_names.end(), p.column_names.begin(), p.column_names.end());
    blocks.push_back(&p.values);
  }
  out.values = Matrix::hconcat(blocks);
  if (out.values.cols() == 0) out.values = Matrix(out.sample_ids.size(), 0);
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw InvariantError("cannot format double");
  return std::string(buf, ptr);
}

std::string render_features_csv(const FeatureMatrix& matrix) {
  for (double v : matrix.values.values())
    if (!std::isfinite(v)) throw DataError("refusing to write a non-finite feature value");
  matrix.validate();
  std::string out = "Id";
  for (const auto& name : matrix.column_names) out += "," + name;
  out += "\n";
  for (std::size_t r = 0; r < matrix.values.rows(); ++r) {
    out += matrix.sample_ids[r];
    for (double v : matrix.values.row(r)) {
      out.push_back(',');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

FeatureMatrix parse_features_csv(std::string_view text) {
  FeatureMatrix m;
  std::vector<double> values;
  bool seen_header = false;
  for_each_line(text, [&](std::string_view line, std::size_t number) {
    if (!seen_header) {
      const auto fields = split_csv(line);
      if (fields.empty() || fields[0] != "Id") throw ParseError("feature header must start with 'Id'", number);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i].empty()) throw ParseError("empty column name", number);
        m.column_names.emplace_back(fields[i]);
      }
      seen_header = true;
      return;
    }
    if (line.empty()) throw ParseError("blank line in feature file", number);
    const auto fields = split_csv(line);
    if (fields.size() != m.column_names.size() + 1)
      throw ParseError("expected " + std::to_string(m.column_names.size() + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       number);
    m.sample_ids.emplace_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      const auto f = fields[i];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ParseError("bad numeric value '" + std::string(f) + "' in column " + m.column_names[i - 1], number);
      values.push_back(v);
    }
  });
  if (!seen_header) throw ParseError("feature file is empty", 1);
  m.values = Matrix(m.sample_ids.size(), m.column_names.size());
  std::copy(values.begin(), values.end(), m.values.values().begin());
  for (const auto& c : m.column_categories())
    if (m.category_ids.empty() || m.category_ids.back() != c) m.category_ids.push_back(c);
  return m;
}

void write_features(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  write_text_file(path, render_features_csv(matrix));
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  try {
    return parse_features_csv(read_text_file(path));
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace malclass
