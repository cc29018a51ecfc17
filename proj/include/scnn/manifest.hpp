#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scnn/image.hpp"
#include "scnn/png_io.hpp"

namespace scnn {

struct ManifestRecord {
  std::string id;
  std::string path;  // as written in the manifest
  int label = kUnknownLabel;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::filesystem::path base_dir;  // relative image paths resolve against this
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const ManifestRecord& r) const {
    const std::filesystem::path p(r.path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

/// Parses a CSV manifest with header `id,path,label`. Labels must be -1
/// (unknown) or 0..4; ids must be unique.
inline Manifest parse_manifest_text(std::string_view text, const std::string& source = "<memory>") {
  static constexpr const char* kModule = "cli";
  Manifest m;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "id,path,label") {
        detail::fail(ErrorCategory::format, kModule, source, ":", line_no, ": expected header 'id,path,label'");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 3) {
      detail::fail(ErrorCategory::format, kModule, source, ":", line_no, ": expected 3 fields, found ", fields.size());
    }
    if (fields[0].empty() || fields[1].empty()) {
      detail::fail(ErrorCategory::format, kModule, source, ":", line_no, ": empty id or path");
    }
    int label = 0;
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), label);
    if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size()) {
      detail::fail(ErrorCategory::format, kModule, source, ":", line_no, ": label '", fields[2], "' is not an integer");
    }
    if (label < kUnknownLabel || label > kMaxLabel) {
      detail::fail(ErrorCategory::format, kModule, source, ":", line_no, ": label ", label,
                   " outside allowed range {-1, 0..4}");
    }
    std::string id(fields[0]);
    if (!ids.insert(id).second) {
      detail::fail(ErrorCategory::format, kModule, source, ":", line_no, ": duplicate id '", id, "'");
    }
    m.records.push_back({std::move(id), std::string(fields[1]), label});
  }
  if (!header_seen) detail::fail(ErrorCategory::format, kModule, source, ": empty manifest (missing header)");
  return m;
}

inline Manifest parse_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(ErrorCategory::io, "cli", "cannot open manifest '", path, "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Manifest m = parse_manifest_text(text, path);
  m.base_dir = std::filesystem::path(path).parent_path();
  return m;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) detail::fail(ErrorCategory::io, "cli", "cannot open '", path, "' for writing");
  out << "id,path,label\n";
  for (const auto& r : records) out << r.id << "," << r.path << "," << r.label << "\n";
}

/// Loads every image of a manifest. Derived ids ("<parent>#aug<n>") regain their parent link.
inline Dataset load_dataset(const Manifest& m) {
  Dataset ds;
  ds.reserve(m.records.size());
  for (const auto& r : m.records) {
    const auto file = m.resolve(r);
    if (!std::filesystem::exists(file)) detail::fail(ErrorCategory::io, "cli", "image file not found: ", file.string());
    LabeledImage item;
    item.id = r.id;
    item.label = r.label;
    item.image = read_png(file.string());
    if (const auto pos = r.id.rfind("#aug"); pos != std::string::npos && pos > 0) item.parent_id = r.id.substr(0, pos);
    ds.push_back(std::move(item));
  }
  return ds;
}

/// Writes each image as <dir>/<id>.png plus <dir>/manifest.csv; returns the records.
inline std::vector<ManifestRecord> write_dataset(const Dataset& ds, const std::filesystem::path& dir,
                                                 const std::string& manifest_name = "manifest.csv") {
  std::filesystem::create_directories(dir);
  std::vector<ManifestRecord> records;
  for (const auto& item : ds) {
    std::string file = item.id + ".png";
    for (char& c : file)
      if (c == '/' || c == '\\' || c == ',' || c == '#') c = '_';
    write_png((dir / file).string(), item.image);
    records.push_back({item.id, file, item.label});
  }
  write_manifest((dir / manifest_name).string(), records);
  return records;
}

}  // namespace scnn
