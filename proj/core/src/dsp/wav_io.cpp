#include "msr/dsp/wav_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "msr/common.hpp"
#include "msr/io_util.hpp"

namespace msr::dsp {

namespace {

constexpr uint16_t kFmtPcm = 1;
constexpr uint16_t kFmtFloat = 3;
constexpr uint16_t kFmtExtensible = 0xFFFE;

uint32_t read_u32(const std::string& b, size_t off) {
  uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;
}

uint16_t read_u16(const std::string& b, size_t off) {
  uint16_t v;
  std::memcpy(&v, b.data() + off, 2);
  return v;
}

void append_u32(std::string& b, uint32_t v) { b.append(reinterpret_cast<const char*>(&v), 4); }
void append_u16(std::string& b, uint16_t v) { b.append(reinterpret_cast<const char*>(&v), 2); }

int16_t to_pcm16(float s) {
  const float c = std::clamp(s, -1.0f, 1.0f);
  return static_cast<int16_t>(std::lrintf(c * 32767.0f));
}

int32_t to_pcm24(float s) {
  const float c = std::clamp(s, -1.0f, 1.0f);
  return static_cast<int32_t>(std::lrintf(c * 8388607.0f));
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  if (b.size() < 44 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
    throw IoError(fmt::format("{}: not a RIFF/WAVE file", path.string()));

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_fmt = false;

  size_t off = 12;
  while (off + 8 <= b.size()) {
    const std::string id = b.substr(off, 4);
    const uint32_t len = read_u32(b, off + 4);
    const size_t body = off + 8;
    if (body + len > b.size())
      throw IoError(fmt::format("{}: truncated chunk '{}'", path.string(), id));
    if (id == "fmt ") {
      if (len < 16) throw IoError(fmt::format("{}: malformed fmt chunk", path.string()));
      format = read_u16(b, body);
      channels = read_u16(b, body + 2);
      rate = read_u32(b, body + 4);
      bits = read_u16(b, body + 14);
      if (format == kFmtExtensible) {
        if (len < 40) throw IoError(fmt::format("{}: malformed extensible fmt chunk", path.string()));
        format = read_u16(b, body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = len;
    }
    off = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_off == 0)
    throw IoError(fmt::format("{}: missing fmt or data chunk", path.string()));
  if (channels != 1 && channels != 2)
    throw IoError(fmt::format("{}: {} channels unsupported (mono/stereo only)",
                              path.string(), channels));

  const int bytes_per = bits / 8;
  if (bytes_per == 0 || data_len % (static_cast<size_t>(bytes_per) * channels) != 0)
    throw IoError(fmt::format("{}: data size {} not a whole number of frames",
                              path.string(), data_len));
  const int64_t n = static_cast<int64_t>(data_len) / (bytes_per * channels);

  Waveform w(channels, n, static_cast<int>(rate));
  const char* src = b.data() + data_off;
  auto sample_at = [&](int64_t frame, int ch) -> float {
    const char* p = src + (frame * channels + ch) * bytes_per;
    if (format == kFmtFloat && bits == 32) {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    if (format == kFmtPcm && bits == 16) {
      int16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<float>(v) / 32768.0f;
    }
    if (format == kFmtPcm && bits == 24) {
      const auto* u = reinterpret_cast<const unsigned char*>(p);
      int32_t v = (u[0] | (u[1] << 8) | (u[2] << 16));
      if (v & 0x800000) v |= ~0xFFFFFF;  // sign-extend
      return static_cast<float>(v) / 8388608.0f;
    }
    throw IoError(fmt::format("{}: unsupported format (tag {}, {} bits)",
                              path.string(), format, bits));
  };
  for (int c = 0; c < channels; ++c) {
    auto dst = w.channel(c);
    for (int64_t i = 0; i < n; ++i) dst[i] = sample_at(i, c);
  }
  return w;
}

Waveform load_wav(const std::filesystem::path& path, int expected_rate) {
  Waveform w = load_wav(path);
  if (w.sample_rate != expected_rate)
    throw ConfigError(fmt::format("{}: sample rate {} does not match configured {}",
                                  path.string(), w.sample_rate, expected_rate));
  return w;
}

void save_wav(const std::filesystem::path& path, const Waveform& wave,
              WavFormat format) {
  if (wave.channels != 1 && wave.channels != 2)
    throw ShapeError("save_wav: mono or stereo only");
  const int64_t n = wave.num_frames();
  const int bytes_per = format == WavFormat::Pcm16 ? 2 : format == WavFormat::Pcm24 ? 3 : 4;
  const uint16_t tag = format == WavFormat::Float32 ? kFmtFloat : kFmtPcm;
  const uint32_t data_len = static_cast<uint32_t>(n * wave.channels * bytes_per);

  std::string b;
  b.reserve(44 + data_len);
  b.append("RIFF");
  append_u32(b, 36 + data_len);
  b.append("WAVE");
  b.append("fmt ");
  append_u32(b, 16);
  append_u16(b, tag);
  append_u16(b, static_cast<uint16_t>(wave.channels));
  append_u32(b, static_cast<uint32_t>(wave.sample_rate));
  append_u32(b, static_cast<uint32_t>(wave.sample_rate * wave.channels * bytes_per));
  append_u16(b, static_cast<uint16_t>(wave.channels * bytes_per));
  append_u16(b, static_cast<uint16_t>(bytes_per * 8));
  b.append("data");
  append_u32(b, data_len);

  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < wave.channels; ++c) {
      const float s = wave.channel(c)[i];
      if (format == WavFormat::Float32) {
        b.append(reinterpret_cast<const char*>(&s), 4);
      } else if (format == WavFormat::Pcm16) {
        const int16_t v = to_pcm16(s);
        b.append(reinterpret_cast<const char*>(&v), 2);
      } else {
        const int32_t v = to_pcm24(s);
        b.append(reinterpret_cast<const char*>(&v), 3);  // little-endian low 3 bytes
      }
    }
  }
  atomic_write_file(path, b);
}

}  // namespace msr::dsp
