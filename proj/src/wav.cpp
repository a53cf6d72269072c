#include "scae/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "scae/tensor.hpp"

namespace scae::data {
namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void wr_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void wr_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

std::vector<float> load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open wav file: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::size_t n = buf.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path.string());

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const char* tag = reinterpret_cast<const char*>(p + pos);
    const std::uint32_t len = rd_u32(p + pos + 4);
    pos += 8;
    if (pos + len > n) throw FormatError("truncated chunk in wav file: " + path.string());
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("short fmt chunk in " + path.string());
      format = rd_u16(p + pos);
      channels = rd_u16(p + pos + 2);
      rate = rd_u32(p + pos + 4);
      bits = rd_u16(p + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = p + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || !data) throw FormatError("missing fmt or data chunk in " + path.string());
  if (format != 1) throw FormatError("encoding: expected PCM (format tag 1), got " +
                                     std::to_string(format) + " in " + path.string());
  if (channels != 1)
    throw FormatError("channels: expected mono, got " + std::to_string(channels) + " in " +
                      path.string());
  if (rate != 16000)
    throw FormatError("sample rate: expected 16000 Hz, got " + std::to_string(rate) + " in " +
                      path.string());
  if (bits != 16)
    throw FormatError("bit depth: expected 16-bit, got " + std::to_string(bits) + " in " +
                      path.string());

  std::vector<float> out(data_len / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int16_t s = static_cast<std::int16_t>(rd_u16(data + 2 * i));
    out[i] = static_cast<float>(s) / 32768.0f;
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const std::vector<float>& samples,
              int sample_rate) {
  std::string b;
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  b += "RIFF";
  wr_u32(b, 36 + data_len);
  b += "WAVEfmt ";
  wr_u32(b, 16);
  wr_u16(b, 1);  // PCM
  wr_u16(b, 1);  // mono
  wr_u32(b, static_cast<std::uint32_t>(sample_rate));
  wr_u32(b, static_cast<std::uint32_t>(sample_rate * 2));
  wr_u16(b, 2);
  wr_u16(b, 16);
  b += "data";
  wr_u32(b, data_len);
  for (float v : samples) {
    const double s = std::clamp(static_cast<double>(v), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lrint(std::clamp(s * 32768.0, -32768.0, 32767.0)));
    wr_u16(b, static_cast<std::uint16_t>(q));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + path.string());
  os.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

}  // namespace scae::data
