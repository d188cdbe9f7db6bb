#include <algorithm>
#include <set>

#include "v2tex/csv.hpp"
#include "v2tex/dataset_io.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view token) {
  if (token == "train") return Split::train;
  if (token == "val") return Split::val;
  if (token == "test") return Split::test;
  throw ValidationError("invalid split token '" + std::string(token) +
                        "' (expected train, val or test)");
}

void DatasetManifest::add(ManifestEntry entry) {
  auto same = [&](const ManifestEntry& e) { return e.path == entry.path; };
  if (std::any_of(entries_.begin(), entries_.end(), same)) {
    throw ValidationError("duplicate manifest path: " + entry.path.string());
  }
  if (entry.label.empty()) throw ValidationError("empty label for " + entry.path.string());
  entries_.push_back(std::move(entry));
}

fs::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  if (entry.path.is_absolute() || base_dir_.empty()) return entry.path;
  return base_dir_ / entry.path;
}

std::vector<ManifestEntry> DatasetManifest::split(Split which) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(out),
               [which](const ManifestEntry& e) { return e.split == which; });
  return out;
}

std::vector<std::string> DatasetManifest::labels() const {
  std::set<std::string> unique;
  for (const auto& e : entries_) unique.insert(e.label);
  return {unique.begin(), unique.end()};
}

DatasetManifest DatasetManifest::read_csv(const fs::path& path) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows.front() != csv::Row{"path", "label", "split"}) {
    throw FormatError("manifest must start with header 'path,label,split': " + path.string());
  }
  DatasetManifest manifest(path.parent_path());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 3) {
      throw FormatError("manifest row " + std::to_string(i + 1) + " does not have 3 fields");
    }
    manifest.add({row[0], row[1], parse_split(row[2])});
  }
  return manifest;
}

void DatasetManifest::write_csv(const fs::path& path) const {
  std::vector<csv::Row> rows{{"path", "label", "split"}};
  for (const auto& e : entries_) {
    rows.push_back({e.path.generic_string(), e.label, std::string(to_string(e.split))});
  }
  csv::write_file(path, rows);
}

std::vector<Image> load_split(const DatasetManifest& manifest, Split which) {
  std::vector<Image> images;
  for (const auto& e : manifest.entries()) {
    if (e.split == which) images.push_back(load_grayscale(manifest.resolve(e)));
  }
  return images;
}

}  // namespace v2tex
