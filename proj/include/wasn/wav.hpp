#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wasn/common.hpp"

namespace wasn {

/// Mono audio buffer with its sample rate.
struct AudioBuffer {
  std::vector<double> samples;  // normalized to [-1, 1] full scale
  double sample_rate = 16000.0;
};

namespace detail {

inline void put_u32(std::ofstream& f, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  f.write(b, 4);
}
inline void put_u16(std::ofstream& f, uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  f.write(b, 2);
}
inline uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint16_t get_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace detail

enum class WavFormat { pcm16, float32 };

inline void write_wav(const std::string& path, const AudioBuffer& audio,
                      WavFormat format = WavFormat::pcm16) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_wav: cannot open " + path);
  const uint32_t num_samples = uint32_t(audio.samples.size());
  const uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const uint16_t block_align = uint16_t(bits / 8);
  const uint32_t data_bytes = num_samples * block_align;
  const uint32_t rate = uint32_t(audio.sample_rate);

  f.write("RIFF", 4);
  detail::put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  detail::put_u32(f, 16);
  detail::put_u16(f, format == WavFormat::pcm16 ? 1 : 3);  // PCM / IEEE float
  detail::put_u16(f, 1);                                   // mono
  detail::put_u32(f, rate);
  detail::put_u32(f, rate * block_align);
  detail::put_u16(f, block_align);
  detail::put_u16(f, bits);
  f.write("data", 4);
  detail::put_u32(f, data_bytes);

  if (format == WavFormat::pcm16) {
    for (double v : audio.samples) {
      const double clamped = std::max(-1.0, std::min(1.0, v));
      const int16_t s = int16_t(std::lround(clamped * 32767.0));
      detail::put_u16(f, uint16_t(s));
    }
  } else {
    for (double v : audio.samples) {
      const float s = float(v);
      uint32_t bits32;
      std::memcpy(&bits32, &s, 4);
      detail::put_u32(f, bits32);
    }
  }
  if (!f) throw Error("write_wav: write failed for " + path);
}

/// Reads a mono PCM16 or float32 WAV file. Samples normalized so that
/// PCM16 full scale maps to n/32768.
inline AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_wav: cannot open " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw Error("read_wav: not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const uint32_t len = detail::get_u32(raw.data() + pos + 4);
    if (std::memcmp(id, "fmt ", 4) == 0 && pos + 8 + 16 <= raw.size()) {
      format = detail::get_u16(raw.data() + pos + 8);
      channels = detail::get_u16(raw.data() + pos + 10);
      rate = detail::get_u32(raw.data() + pos + 12);
      bits = detail::get_u16(raw.data() + pos + 22);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = raw.data() + pos + 8;
      data_len = std::min<uint32_t>(len, uint32_t(raw.size() - pos - 8));
    }
    pos += 8 + len + (len & 1);
  }
  if (!data) throw Error("read_wav: missing data chunk: " + path);
  if (channels != 1) throw Error("read_wav: only mono supported: " + path);
  if (data_len == 0) throw Error("read_wav: empty audio: " + path);

  AudioBuffer audio;
  audio.sample_rate = double(rate);
  if (format == 1 && bits == 16) {
    const size_t n = data_len / 2;
    audio.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const int16_t s = int16_t(detail::get_u16(data + 2 * i));
      audio.samples[i] = double(s) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    const size_t n = data_len / 4;
    audio.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const uint32_t b = detail::get_u32(data + 4 * i);
      float s;
      std::memcpy(&s, &b, 4);
      audio.samples[i] = double(s);
    }
  } else {
    throw Error("read_wav: unsupported format (need PCM16 or float32): " + path);
  }
  return audio;
}

}  // namespace wasn
