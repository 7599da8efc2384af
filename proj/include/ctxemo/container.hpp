#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ctxemo/tensor.hpp"

namespace ctxemo::io {

/// Binary container of named real arrays.
///
/// Byte layout (all integers little-endian):
///   magic        8 bytes  "CTXEMOBN"
///   container    u32      container format version (1)
///   kind         str      payload kind, e.g. "checkpoint", "features"
///   schema       u32      kind-specific schema version
///   attr_count   u32      then attr_count x (str key, str value)
///   record_count u32      then record_count x record
/// record:
///   name str, rank u32, dims u64[rank], values f64[prod(dims)] (IEEE-754 binary64)
/// str: u32 byte length followed by UTF-8 bytes.
struct Record {
  std::string name;
  nd::Shape shape;
  std::vector<double> values;
  bool operator==(const Record&) const = default;
};

struct Container {
  std::string kind;
  std::uint32_t schema_version = 1;
  std::map<std::string, std::string> attributes;
  std::vector<Record> records;

  const Record* find(const std::string& name) const;
  const Record& at(const std::string& name) const;
  std::string attribute(const std::string& key) const;
  bool operator==(const Container&) const = default;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(std::ostream& out, const Container& c);
Container read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const Container& c);
/// Loads and checks `kind` and `schema_version` when non-empty / non-zero.
Container load_container(const std::filesystem::path& path, const std::string& expected_kind = {},
                         std::uint32_t expected_schema = 0);

}  // namespace ctxemo::io
