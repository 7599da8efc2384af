#include "ctxemo/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ctxemo::io {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'T', 'X', 'E', 'M', 'O', 'B', 'N'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint64_t kMaxElements = 1ull << 34;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw std::runtime_error("container truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void put_str(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  const auto len = get_le<std::uint32_t>(in);
  if (len > (1u << 24)) throw std::runtime_error("container string length is implausible");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("container truncated");
  return s;
}

}  // namespace

const Record* Container::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

const Record& Container::at(const std::string& name) const {
  if (const auto* r = find(name)) return *r;
  throw std::runtime_error(kind + " container has no record '" + name + "'");
}

std::string Container::attribute(const std::string& key) const {
  auto it = attributes.find(key);
  if (it == attributes.end()) {
    throw std::runtime_error(kind + " container has no attribute '" + key + "'");
  }
  return it->second;
}

void write_container(std::ostream& out, const Container& c) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kContainerVersion);
  put_str(out, c.kind);
  put_le<std::uint32_t>(out, c.schema_version);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.attributes.size()));
  for (const auto& [k, v] : c.attributes) {
    put_str(out, k);
    put_str(out, v);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    if (nd::shape_numel(r.shape) != r.values.size()) {
      throw std::invalid_argument("record '" + r.name + "' shape " + nd::shape_str(r.shape) +
                                  " does not match its value count");
    }
    put_str(out, r.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put_le<std::uint64_t>(out, d);
    for (double v : r.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("failed writing container");
}

Container read_container(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a ctxemo binary container");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kContainerVersion) {
    throw std::runtime_error("unsupported container version " + std::to_string(version));
  }
  Container c;
  c.kind = get_str(in);
  c.schema_version = get_le<std::uint32_t>(in);
  const auto attrs = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < attrs; ++i) {
    auto k = get_str(in);
    c.attributes[k] = get_str(in);
  }
  const auto count = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r;
    r.name = get_str(in);
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 16) throw std::runtime_error("record '" + r.name + "' rank is implausible");
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = get_le<std::uint64_t>(in);
      r.shape.push_back(static_cast<std::size_t>(dim));
      total *= dim;
      if (total > kMaxElements) throw std::runtime_error("record '" + r.name + "' is too large");
    }
    r.values.resize(total);
    for (auto& v : r.values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    c.records.push_back(std::move(r));
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_container(out, c);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Container load_container(const std::filesystem::path& path, const std::string& expected_kind,
                         std::uint32_t expected_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  Container c;
  try {
    c = read_container(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (!expected_kind.empty() && c.kind != expected_kind) {
    throw std::runtime_error(path.string() + ": expected a '" + expected_kind +
                             "' container, found '" + c.kind + "'");
  }
  if (expected_schema != 0 && c.schema_version != expected_schema) {
    throw std::runtime_error(path.string() + ": " + c.kind + " schema version " +
                             std::to_string(c.schema_version) + " is not supported (expected " +
                             std::to_string(expected_schema) + ")");
  }
  return c;
}

}  // namespace ctxemo::io
