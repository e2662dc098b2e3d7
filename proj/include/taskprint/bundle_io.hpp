#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskprint/bundle.hpp"
#include "taskprint/csv.hpp"
#include "taskprint/errors.hpp"

// Bundle directory layout:
//   manifest.json   {schema_version:1, id, n, m_total, num_classes?, domain,
//                    task_types[], dtype:"f32le", provenance?}
//   features.bin    row-major little-endian f32, exactly m_total*n*4 bytes
//   labels.bin      little-endian u32, m_total*4 bytes (labeled bundles only)
// Alternative: a .csv file with a header row, feature columns and an optional
// final `label` column.

namespace taskprint {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

constexpr std::uint32_t kBundleSchemaVersion = 1;

namespace detail {

inline std::vector<char> read_binary_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + p.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_binary_file(const std::filesystem::path& p, const char* data, std::size_t size) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + p.string());
  out.write(data, static_cast<std::streamsize>(size));
  out.flush();
  if (!out) throw IoError("write failed: " + p.string());
}

inline nlohmann::json parse_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open file: " + p.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError("invalid JSON: " + p.string());
  return j;
}

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
  std::string text = j.dump(2);
  text.push_back('\n');
  write_binary_file(p, text.data(), text.size());
}

}  // namespace detail

inline TaskBundle load_bundle_dir(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw FormatError("bundle directory has no manifest.json: " + dir.string());
  const nlohmann::json manifest = detail::parse_json_file(manifest_path);

  TaskBundle b;
  try {
    if (manifest.at("schema_version").get<std::uint32_t>() != kBundleSchemaVersion)
      throw VersionError("bundle schema_version " + manifest.at("schema_version").dump() +
                         " unsupported; expected " + std::to_string(kBundleSchemaVersion));
    b.id = manifest.at("id").get<std::string>();
    b.domain = manifest.at("domain").get<std::string>();
    b.task_types = manifest.at("task_types").get<std::vector<std::string>>();
    if (manifest.at("dtype").get<std::string>() != "f32le")
      throw FormatError("unsupported dtype '" + manifest.at("dtype").get<std::string>() +
                        "' in " + manifest_path.string());
    if (manifest.contains("provenance")) b.provenance = manifest.at("provenance").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad manifest " + manifest_path.string() + ": " + e.what());
  }

  const auto m_total = manifest.at("m_total").get<std::uint64_t>();
  const auto n = manifest.at("n").get<std::uint64_t>();
  if (m_total == 0 || n == 0) throw ShapeError("manifest declares empty matrix: " + dir.string());

  const auto bytes = detail::read_binary_file(dir / "features.bin");
  if (bytes.size() != m_total * n * sizeof(float))
    throw ShapeError("features.bin is " + std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(m_total * n * sizeof(float)) + " in " + dir.string());
  b.features.resize(static_cast<Eigen::Index>(m_total), static_cast<Eigen::Index>(n));
  const float* vals = reinterpret_cast<const float*>(bytes.data());
  for (Eigen::Index r = 0; r < b.features.rows(); ++r)
    for (Eigen::Index c = 0; c < b.features.cols(); ++c)
      b.features(r, c) = static_cast<double>(vals[static_cast<std::size_t>(r) * n + c]);

  if (manifest.contains("num_classes")) {
    b.num_classes = manifest.at("num_classes").get<std::uint32_t>();
    const auto label_bytes = detail::read_binary_file(dir / "labels.bin");
    if (label_bytes.size() != m_total * sizeof(std::uint32_t))
      throw ShapeError("labels.bin is " + std::to_string(label_bytes.size()) +
                       " bytes, expected " + std::to_string(m_total * sizeof(std::uint32_t)) +
                       " in " + dir.string());
    b.labels.resize(m_total);
    std::memcpy(b.labels.data(), label_bytes.data(), label_bytes.size());
  }

  validate_bundle(b);
  return b;
}

inline TaskBundle load_bundle_csv(const std::filesystem::path& file) {
  const auto lines = csv::read_lines(file.string());
  if (lines.empty()) throw FormatError("empty CSV file: " + file.string());
  const auto header = csv::split_line(lines[0]);
  if (header.empty()) throw FormatError("empty CSV header: " + file.string());
  const bool labeled = header.back() == "label";
  const std::size_t n = header.size() - (labeled ? 1 : 0);
  if (n == 0) throw FormatError("CSV has no feature columns: " + file.string());

  TaskBundle b;
  b.id = file.stem().string();
  b.domain = "unknown";
  b.provenance = "csv:" + file.filename().string();

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv::split_line(lines[i]);
    if (fields.size() != header.size())
      throw ShapeError("CSV row " + std::to_string(i + 1) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()) + " in " + file.string());
    std::vector<double> row(n);
    for (std::size_t c = 0; c < n; ++c) row[c] = csv::parse_double(fields[c], header[c]);
    rows.push_back(std::move(row));
    if (labeled) b.labels.push_back(csv::parse_u32(fields.back(), "label"));
  }
  if (rows.empty()) throw FormatError("CSV has no data rows: " + file.string());

  b.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < n; ++c) b.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (labeled) {
    std::uint32_t max_label = 0;
    for (std::uint32_t label : b.labels) max_label = std::max(max_label, label);
    b.num_classes = max_label + 1;
  }

  validate_bundle(b);
  return b;
}

inline TaskBundle load_task_bundle(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_bundle_dir(path);
  if (path.extension() == ".csv") return load_bundle_csv(path);
  if (!std::filesystem::exists(path)) throw IoError("no such bundle: " + path.string());
  throw FormatError("not a bundle directory or .csv file: " + path.string());
}

inline void save_task_bundle(const TaskBundle& b, const std::filesystem::path& dir) {
  validate_bundle(b);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  nlohmann::json manifest{
      {"schema_version", kBundleSchemaVersion},
      {"id", b.id},
      {"n", b.features.cols()},
      {"m_total", b.features.rows()},
      {"domain", b.domain},
      {"task_types", b.task_types},
      {"dtype", "f32le"},
  };
  if (b.labeled()) manifest["num_classes"] = b.num_classes;
  if (!b.provenance.empty()) manifest["provenance"] = b.provenance;
  detail::write_json_file(dir / "manifest.json", manifest);

  std::vector<float> buf(static_cast<std::size_t>(b.features.rows()) * b.features.cols());
  for (Eigen::Index r = 0; r < b.features.rows(); ++r)
    for (Eigen::Index c = 0; c < b.features.cols(); ++c)
      buf[static_cast<std::size_t>(r) * b.features.cols() + c] = static_cast<float>(b.features(r, c));
  detail::write_binary_file(dir / "features.bin", reinterpret_cast<const char*>(buf.data()),
                            buf.size() * sizeof(float));

  if (b.labeled()) {
    detail::write_binary_file(dir / "labels.bin", reinterpret_cast<const char*>(b.labels.data()),
                              b.labels.size() * sizeof(std::uint32_t));
  } else {
    std::filesystem::remove(dir / "labels.bin", ec);
  }
}

}  // namespace taskprint
