#include "scripta/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"

#include "csv.hpp"
#include "scripta/binary_io.hpp"
#include "scripta/error.hpp"

namespace scripta {

std::string to_string(Split split) {
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

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  return std::nullopt;
}

std::uint32_t Manifest::class_index(std::string_view label) const {
  const auto it = std::lower_bound(class_list.begin(), class_list.end(), label);
  if (it == class_list.end() || *it != label) throw ArgumentError("unknown class label '" + std::string(label) + "'");
  return static_cast<std::uint32_t>(it - class_list.begin());
}

std::vector<std::uint32_t> Manifest::labels() const {
  std::vector<std::uint32_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(class_index(r.label));
  return out;
}

std::vector<std::size_t> Manifest::select(std::initializer_list<Split> splits) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (std::find(splits.begin(), splits.end(), records[i].split) != splits.end()) out.push_back(i);
  }
  return out;
}

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir, std::string_view source_name) {
  auto fail = [&](std::size_t line_no, const std::string& msg) -> ParseError {
    return ParseError(std::string(source_name) + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw fail(1, "missing header `path,label,split,group`");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = csv::split_line(line, source_name, line_no);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* required : {"path", "label", "split", "group"}) {
    if (!column.contains(required)) throw fail(line_no, std::string("header lacks column '") + required + "'");
  }
  const std::size_t c_path = column["path"], c_label = column["label"], c_split = column["split"],
                    c_group = column["group"];

  Manifest m;
  std::set<std::string> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = csv::split_line(line, source_name, line_no);
    if (fields.size() != header.size()) {
      throw fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    SampleRecord rec;
    if (fields[c_path].empty()) throw fail(line_no, "empty path");
    if (fields[c_label].empty()) throw fail(line_no, "empty label");
    const auto split = parse_split(fields[c_split]);
    if (!split) throw fail(line_no, "unknown split '" + fields[c_split] + "' (expected train, val or test)");
    std::filesystem::path p = fields[c_path];
    rec.path = p.is_absolute() ? p : base_dir / p;
    rec.label = fields[c_label];
    rec.split = *split;
    if (!fields[c_group].empty()) rec.group = fields[c_group];
    labels.insert(rec.label);
    m.records.push_back(std::move(rec));
  }
  m.class_list.assign(labels.begin(), labels.end());
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

std::vector<Fold> make_group_folds(const Manifest& manifest, std::size_t n_folds_expected) {
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    if (!rec.group) throw ArgumentError("record " + std::to_string(i) + " (" + rec.path.string() + ") has no group");
    by_group[*rec.group].push_back(i);
  }
  if (by_group.size() != n_folds_expected) {
    throw ArgumentError("expected " + std::to_string(n_folds_expected) + " groups, found " + std::to_string(by_group.size()));
  }
  std::vector<Fold> folds;
  folds.reserve(by_group.size());
  for (const auto& [group, members] : by_group) {
    Fold f;
    f.group = group;
    f.test = members;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
      if (manifest.records[i].group != group) f.train.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<std::pair<std::size_t, std::size_t>> find_duplicate_paths(const Manifest& a, const Manifest& b) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < a.records.size(); ++i) seen.emplace(a.records[i].path.lexically_normal().string(), i);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j = 0; j < b.records.size(); ++j) {
    if (auto it = seen.find(b.records[j].path.lexically_normal().string()); it != seen.end()) out.emplace_back(it->second, j);
  }
  return out;
}

void FeatureStore::append(std::span<const float> values, std::uint32_t label) {
  if (labels.empty() && dim == 0) dim = static_cast<std::uint32_t>(values.size());
  if (values.size() != dim) {
    throw ArgumentError("feature row of dim " + std::to_string(values.size()) + " appended to store of dim " + std::to_string(dim));
  }
  matrix.insert(matrix.end(), values.begin(), values.end());
  labels.push_back(label);
}

FeatureStore FeatureStore::subset(std::span<const std::size_t> indices) const {
  FeatureStore out;
  out.dim = dim;
  out.config_digest = config_digest;
  out.class_list = class_list;
  out.config = config;
  out.matrix.reserve(indices.size() * dim);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw ArgumentError("subset index " + std::to_string(i) + " out of range");
    out.append(row(i), labels[i]);
  }
  return out;
}

void FeatureStore::validate() const {
  if (matrix.size() != labels.size() * static_cast<std::size_t>(dim)) {
    throw ArgumentError("feature matrix size does not equal n_samples * dim");
  }
  for (auto l : labels) {
    if (l >= class_list.size()) throw ArgumentError("label index " + std::to_string(l) + " outside class list");
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& store_path) {
  return std::filesystem::path(store_path.string() + ".json");
}

namespace {

constexpr char kStoreMagic[4] = {'S', 'R', 'S', 'F'};
constexpr std::uint32_t kStoreVersion = 1;

}  // namespace

void write_features(const FeatureStore& store, const std::filesystem::path& path) {
  store.validate();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    binary::write_bytes(out, kStoreMagic, 4);
    binary::write_u32(out, kStoreVersion);
    binary::write_u32(out, static_cast<std::uint32_t>(store.size()));
    binary::write_u32(out, store.dim);
    binary::write_bytes(out, store.config_digest.data(), store.config_digest.size());
    binary::write_f32_array(out, store.matrix.data(), store.matrix.size());
    for (auto l : store.labels) binary::write_u32(out, l);
    if (!out) throw IoError("write failed: " + path.string());
  }

  nlohmann::ordered_json meta;
  meta["class_list"] = store.class_list;
  meta["config_digest"] = to_hex(store.config_digest);
  if (store.config) {
    meta["extraction"] = {{"radii", store.config->radii},
                          {"zones", to_string(store.config->zones)},
                          {"canonical", store.config->canonical()}};
  } else {
    meta["extraction"] = nullptr;
  }
  const auto side = sidecar_path(path);
  std::ofstream out(side, std::ios::trunc);
  if (!out) throw IoError("cannot open " + side.string() + " for writing");
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + side.string());
}

FeatureStore read_features(const std::filesystem::path& path, const std::optional<Digest>& expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature store " + path.string());
  const std::string where = "feature store " + path.string();
  char magic[4];
  binary::read_bytes(in, magic, 4, where + " magic");
  if (!std::equal(magic, magic + 4, kStoreMagic)) throw FormatError(where + ": bad magic (expected SRSF)");
  const auto version = binary::read_u32(in, where + " version");
  if (version != kStoreVersion) throw FormatError(where + ": unsupported version " + std::to_string(version));
  const auto n = binary::read_u32(in, where + " n_samples");
  FeatureStore store;
  store.dim = binary::read_u32(in, where + " dim");
  binary::read_bytes(in, store.config_digest.data(), store.config_digest.size(), where + " digest");
  const auto file_size = std::filesystem::file_size(path);
  const std::uint64_t expected_size = 48 + static_cast<std::uint64_t>(n) * store.dim * 4 + static_cast<std::uint64_t>(n) * 4;
  if (file_size != expected_size) {
    throw FormatError(where + ": size " + std::to_string(file_size) + " does not match header (expected " +
                      std::to_string(expected_size) + ")");
  }
  store.matrix.resize(static_cast<std::size_t>(n) * store.dim);
  binary::read_f32_array(in, store.matrix.data(), store.matrix.size(), where + " matrix");
  store.labels.resize(n);
  for (auto& l : store.labels) l = binary::read_u32(in, where + " labels");

  if (expected_digest && *expected_digest != store.config_digest) {
    throw ConfigError(where + ": config digest " + to_hex(store.config_digest) + " does not match expected " +
                      to_hex(*expected_digest));
  }

  const auto side = sidecar_path(path);
  std::ifstream sin(side);
  if (!sin) throw IoError("cannot open feature store sidecar " + side.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(sin);
    store.class_list = meta.at("class_list").get<std::vector<std::string>>();
    if (digest_from_hex(meta.at("config_digest").get<std::string>()) != store.config_digest) {
      throw ConfigError(side.string() + ": sidecar digest disagrees with " + path.string());
    }
    const auto& ex = meta.at("extraction");
    if (!ex.is_null()) {
      FeatureConfig cfg;
      cfg.radii = ex.at("radii").get<std::vector<int>>();
      cfg.zones = parse_zone_mode(ex.at("zones").get<std::string>());
      cfg.validate();
      store.config = cfg;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
  try {
    store.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(where + ": " + e.what());
  }
  return store;
}

}  // namespace scripta
