#include "scae/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace scae {
namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}
void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

// Streaming reader; entries can be gigabytes, so the file is never held
// in memory as a whole.
class Reader {
 public:
  Reader(std::istream& is, const std::string& where) : is_(is), where_(where) {}
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    unsigned char b[2];
    raw(b, 2);
    return static_cast<std::uint16_t>(b[0]) | (static_cast<std::uint16_t>(b[1]) << 8);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void raw(void* dst, std::size_t n) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw ContainerError("truncated container file: " + where_);
  }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
  std::string where_;
};

static_assert(std::endian::native == std::endian::little,
              "raw element data is written little-endian; big-endian hosts need a swap here");

}  // namespace

void save_container(const std::filesystem::path& path, const std::vector<ContainerEntry>& entries,
                    const std::string& meta) {
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (e.name.empty()) throw ContainerError("entry name must be non-empty");
    if (!names.insert(e.name).second) throw ContainerError("duplicate entry name: " + e.name);
    if (e.width != 4 && e.width != 8) throw ContainerError("element width must be 4 or 8");
  }

  // write-then-rename so readers never observe a partial file
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ContainerError("cannot open for write: " + path.string());
    os.write("SCAE", 4);
    put_u16(os, 1);
    put_u32(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      put_u16(os, static_cast<std::uint16_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      os.put(static_cast<char>(e.width));
      os.put(static_cast<char>(e.shape.size()));
      std::size_t n = 1;
      for (auto d : e.shape) {
        put_u32(os, static_cast<std::uint32_t>(d));
        n *= d;
      }
      if (e.width == 4) {
        if (e.f32.size() != n) throw ContainerError("entry data size mismatch: " + e.name);
        os.write(reinterpret_cast<const char*>(e.f32.data()), static_cast<std::streamsize>(n * 4));
      } else {
        if (e.f64.size() != n) throw ContainerError("entry data size mismatch: " + e.name);
        os.write(reinterpret_cast<const char*>(e.f64.data()), static_cast<std::streamsize>(n * 8));
      }
    }
    if (!os) throw ContainerError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::pair<std::vector<ContainerEntry>, std::string> load_container(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContainerError("cannot open: " + path.string());

  Reader r(is, path.string());
  if (r.bytes(4) != "SCAE") throw ContainerError("bad magic in " + path.string());
  const std::uint16_t version = r.u16();
  if (version != 1)
    throw ContainerError("unsupported container version " + std::to_string(version));
  const std::uint32_t meta_len = r.u32();
  std::string meta = r.bytes(meta_len);
  const std::uint32_t count = r.u32();

  std::vector<ContainerEntry> entries;
  std::set<std::string> names;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerEntry e;
    e.name = r.bytes(r.u16());
    if (e.name.empty() || !names.insert(e.name).second)
      throw ContainerError("bad or duplicate entry name in " + path.string());
    e.width = r.u8();
    if (e.width != 4 && e.width != 8) throw ContainerError("bad element width in " + path.string());
    const std::uint8_t rank = r.u8();
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      e.shape.push_back(r.u32());
      if (e.shape.back() == 0) throw ContainerError("zero dim in " + path.string());
      n *= e.shape.back();
    }
    if (e.width == 4) {
      e.f32.resize(n);
      r.raw(e.f32.data(), n * 4);
    } else {
      e.f64.resize(n);
      r.raw(e.f64.data(), n * 8);
    }
    entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw ContainerError("trailing bytes in " + path.string());
  return {std::move(entries), std::move(meta)};
}

}  // namespace scae
