#include "nsr/cli/manifest.hpp"

#include <ctime>
#include <fstream>

#include "nsr/error.hpp"

namespace nsr::cli {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  const nlohmann::json j{{"command", m.command},   {"args", m.args},           {"config", m.config},
                         {"seed", m.seed},         {"artifacts", m.artifacts}, {"started", m.started},
                         {"finished", m.finished}, {"tool_version", m.tool_version}};
  std::ofstream out(dir / kManifestName);
  if (!out) throw InvalidConfig("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFileMissing("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config = j.value("config", nlohmann::json::object());
    m.seed = j.value("seed", std::uint64_t{0});
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.tool_version = j.value("tool_version", "");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace nsr::cli
