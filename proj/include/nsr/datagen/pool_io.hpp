#pragma once

#include <filesystem>
#include <iosfwd>

#include "nsr/datagen/generator.hpp"

namespace nsr::datagen {

inline constexpr int kPoolFormatVersion = 1;

/// Text format: a header line "# nsr-pool v<version> count=<n>", then one JSON
/// object per line: {"prefix":[...],"placeholder_count":k,"infix":"...","length":n}.
void write_pool(const SkeletonPool& pool, std::ostream& out);
void write_pool(const SkeletonPool& pool, const std::filesystem::path& path);

/// Throws VersionMismatch for an unknown header version, ParseError or
/// MalformedExpression on bad records, DataFileMissing if the file is absent.
SkeletonPool read_pool(std::istream& in);
SkeletonPool read_pool(const std::filesystem::path& path);

}  // namespace nsr::datagen
