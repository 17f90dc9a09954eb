#include "fsdpo/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fsdpo/errors.hpp"
#include "json.hpp"

namespace fsdpo::harness {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string header_json_line(const ArtifactHeader& h) {
  json extra = json::object();
  for (const auto& [k, v] : h.extra) extra[k] = v;
  json j{{"_header",
          json{{"artifact", h.artifact},
               {"version", h.version},
               {"seed", std::to_string(h.seed)},
               {"config_hash", hex64(h.config_hash)},
               {"extra", std::move(extra)}}}};
  return j.dump();
}

ArtifactHeader header_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  if (!j.contains("_header")) throw UsageError("artifact file has no header line");
  const json& h = j.at("_header");
  ArtifactHeader out;
  out.artifact = h.at("artifact").get<std::string>();
  out.version = h.at("version").get<int>();
  out.seed = std::stoull(h.at("seed").get<std::string>());
  out.config_hash = std::stoull(h.at("config_hash").get<std::string>(), nullptr, 16);
  for (const auto& [k, v] : h.at("extra").items()) out.extra[k] = v.get<std::string>();
  return out;
}

void write_jsonl(const std::filesystem::path& path, const ArtifactHeader& header,
                 const std::vector<std::string>& lines) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << header_json_line(header) << '\n';
  for (const std::string& line : lines) out << line << '\n';
}

std::vector<std::string> read_jsonl(const std::filesystem::path& path,
                                    const std::string& expected_artifact,
                                    ArtifactHeader* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("missing artifact: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw UsageError("empty artifact: " + path.string());
  const ArtifactHeader header = header_from_json_line(line);
  if (!expected_artifact.empty() && header.artifact != expected_artifact)
    throw UsageError("artifact " + path.string() + " is '" + header.artifact +
                     "', expected '" + expected_artifact + "'");
  if (header_out) *header_out = header;
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_csv(const std::filesystem::path& path, const ArtifactHeader& header,
               const std::string& column_header, const std::vector<std::string>& rows) {
  std::string text = "# artifact=" + header.artifact + " config_hash=" +
                     hex64(header.config_hash) + " seed=" + std::to_string(header.seed) +
                     "\n" + column_header + "\n";
  for (const std::string& row : rows) {
    text += row;
    text += '\n';
  }
  write_text(path, text);
}

}  // namespace fsdpo::harness
