#include "nsr/datagen/pool_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "nsr/error.hpp"

namespace nsr::datagen {

namespace {
constexpr std::string_view kMagic = "# nsr-pool v";
}

void write_pool(const SkeletonPool& pool, std::ostream& out) {
  out << kMagic << kPoolFormatVersion << " count=" << pool.size() << '\n';
  for (const auto& s : pool.skeletons) {
    nlohmann::json rec;
    rec["prefix"] = expr::to_prefix(s.expr);
    rec["placeholder_count"] = s.placeholder_count;
    rec["infix"] = expr::to_infix(s.expr);
    rec["length"] = s.expr.size();
    out << rec.dump() << '\n';
  }
}

void write_pool(const SkeletonPool& pool, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_pool(pool, out);
  if (!out) throw Error("failed writing " + path.string());
}

SkeletonPool read_pool(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) throw ParseError("missing pool header");
  int version = 0;
  {
    std::istringstream hdr(line.substr(kMagic.size()));
    if (!(hdr >> version)) throw ParseError("malformed pool header: " + line);
  }
  if (version != kPoolFormatVersion)
    throw VersionMismatch("pool format v" + std::to_string(version) + ", expected v" +
                          std::to_string(kPoolFormatVersion));

  SkeletonPool pool;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("pool line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.contains("prefix") || !rec["prefix"].is_array())
      throw ParseError("pool line " + std::to_string(line_no) + ": missing prefix");
    const auto tokens = rec["prefix"].get<std::vector<expr::TokenId>>();
    expr::Skeleton s = expr::Skeleton::of(expr::parse_prefix(tokens));
    if (rec.contains("placeholder_count") && rec["placeholder_count"].get<int>() != s.placeholder_count)
      throw ParseError("pool line " + std::to_string(line_no) + ": placeholder_count disagrees with prefix");
    pool.skeletons.push_back(std::move(s));
  }
  pool.stats = compute_stats(pool.skeletons);
  return pool;
}

SkeletonPool read_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFileMissing("pool file not found: " + path.string());
  return read_pool(in);
}

}  // namespace nsr::datagen
