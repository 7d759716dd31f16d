#include "ladi/numcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ladi/common.hpp"

namespace ladi::numcore {

namespace {

constexpr std::uint32_t kContainerVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("truncated container");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace

std::string encode_container(const Container& c) {
  if (c.magic.size() != 8) throw ConfigError("container magic must be 8 bytes");
  const std::string header = c.header.dump();
  std::string out;
  out.reserve(8 + 4 + 8 + header.size() + 8 + 8 * c.payload.size());
  out += c.magic;
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint64_t>(out, header.size());
  out += header;
  put_le<std::uint64_t>(out, c.payload.size());
  for (double d : c.payload) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(d));
  return out;
}

Container decode_container(const std::string& bytes,
                           const std::string& expected_magic) {
  if (bytes.size() < 8 || bytes.compare(0, 8, expected_magic) != 0) {
    throw DataError("bad container magic, expected " + expected_magic);
  }
  std::size_t pos = 8;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kContainerVersion) {
    throw DataError("unsupported container version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw DataError("truncated container header");
  Container c;
  c.magic = expected_magic;
  c.header = nlohmann::json::parse(bytes.substr(pos, header_len));
  pos += header_len;
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (pos + 8 * count != bytes.size()) throw DataError("container payload size mismatch");
  c.payload.resize(count);
  for (auto& d : c.payload) d = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open for writing: " + path.string());
  const std::string bytes = encode_container(c);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path,
                         const std::string& expected_magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_container(ss.str(), expected_magic);
}

const CheckpointEntry& Checkpoint::entry(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw DataError("checkpoint has no entry named " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

Container to_container(const Checkpoint& ckpt) {
  Container c;
  c.magic = kCheckpointMagic;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : ckpt.entries) {
    const std::size_t n = e.params.size();
    if (e.adam.m.size() != n || e.adam.v.size() != n) {
      throw ConfigError("optimizer moments do not match parameters in " + e.name);
    }
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& s : e.params.layout()) {
      layout.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
    }
    entries.push_back({{"name", e.name},
                       {"meta", e.meta},
                       {"layout", layout},
                       {"step", e.adam.step},
                       {"size", n}});
    const auto& v = e.params.values();
    c.payload.insert(c.payload.end(), v.begin(), v.end());
    c.payload.insert(c.payload.end(), e.adam.m.begin(), e.adam.m.end());
    c.payload.insert(c.payload.end(), e.adam.v.begin(), e.adam.v.end());
  }
  c.header = {{"kind", "checkpoint"},
              {"seed", ckpt.seed},
              {"info", ckpt.info},
              {"entries", entries}};
  return c;
}

Checkpoint from_container(const Container& c) {
  if (c.header.value("kind", "") != "checkpoint") {
    throw DataError("container is not a checkpoint");
  }
  Checkpoint ckpt;
  ckpt.seed = c.header.at("seed").get<std::uint64_t>();
  ckpt.info = c.header.value("info", nlohmann::json());
  std::size_t pos = 0;
  for (const auto& je : c.header.at("entries")) {
    CheckpointEntry e;
    e.name = je.at("name").get<std::string>();
    e.meta = je.at("meta");
    const auto n = je.at("size").get<std::size_t>();
    if (pos + 3 * n > c.payload.size()) throw DataError("checkpoint payload too short");
    std::vector<Slice> layout;
    for (const auto& js : je.at("layout")) {
      layout.push_back({js.at("name").get<std::string>(),
                        js.at("offset").get<std::size_t>(),
                        js.at("length").get<std::size_t>()});
    }
    auto at = [&](std::size_t k) {
      return std::vector<double>(c.payload.begin() + static_cast<std::ptrdiff_t>(pos + k * n),
                                 c.payload.begin() + static_cast<std::ptrdiff_t>(pos + (k + 1) * n));
    };
    e.params = ParamVector::from_parts(std::move(layout), at(0));
    e.adam.m = at(1);
    e.adam.v = at(2);
    e.adam.step = je.at("step").get<std::uint64_t>();
    pos += 3 * n;
    ckpt.entries.push_back(std::move(e));
  }
  if (pos != c.payload.size()) throw DataError("checkpoint payload has trailing data");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_container(path, to_container(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return from_container(read_container(path, kCheckpointMagic));
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  return read_container(path, kCheckpointMagic).header;
}

}  // namespace ladi::numcore
