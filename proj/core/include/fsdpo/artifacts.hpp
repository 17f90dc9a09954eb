#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fsdpo::harness {

// Every artifact file opens with a header carrying the experiment seed and
// config hash, so stale or mismatched stage inputs are caught on load.
struct ArtifactHeader {
  std::string artifact;
  int version = 1;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> extra;  // stage-specific counters etc.
};

std::string header_json_line(const ArtifactHeader& h);
ArtifactHeader header_from_json_line(const std::string& line);

void write_jsonl(const std::filesystem::path& path, const ArtifactHeader& header,
                 const std::vector<std::string>& lines);

// Reads a jsonl artifact, validates the artifact name, returns body lines.
std::vector<std::string> read_jsonl(const std::filesystem::path& path,
                                    const std::string& expected_artifact,
                                    ArtifactHeader* header_out = nullptr);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// "# config_hash=<hex> seed=<dec>" comment line + header row + rows.
void write_csv(const std::filesystem::path& path, const ArtifactHeader& header,
               const std::string& column_header, const std::vector<std::string>& rows);

}  // namespace fsdpo::harness
