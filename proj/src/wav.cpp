#include "derev/wav.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace derev {

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (uint32_t(p[3]) << 24);
}
uint16_t get_u16(const uint8_t* p) { return p[0] | (p[1] << 8); }

}  // namespace

Audio read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open WAV file: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    uint32_t chunk_len = get_u32(buf.data() + pos + 4);
    const uint8_t* body = buf.data() + pos + 8;
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = get_u16(body);
      channels = get_u16(body + 2);
      sample_rate = get_u32(body + 4);
      bits = get_u16(body + 14);
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (!data || channels == 0) throw std::runtime_error("malformed WAV: " + path);
  // 0xfffe (extensible) carries the real format in the extension; we only
  // accept the plain PCM and float variants.
  if (!((format == 1 && (bits == 16 || bits == 32)) || (format == 3 && bits == 32)))
    throw std::runtime_error("unsupported WAV format in " + path);

  const int bytes_per = bits / 8;
  const long frames = data_len / (bytes_per * channels);

  Audio audio;
  audio.sample_rate = static_cast<int>(sample_rate);
  audio.channels.assign(channels, std::vector<double>(frames));
  for (long n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      const uint8_t* p = data + (n * channels + c) * bytes_per;
      double v;
      if (format == 3) {
        float fv;
        std::memcpy(&fv, p, 4);
        v = fv;
      } else if (bits == 16) {
        int16_t iv = static_cast<int16_t>(get_u16(p));
        v = iv / 32768.0;
      } else {
        int32_t iv = static_cast<int32_t>(get_u32(p));
        v = iv / 2147483648.0;
      }
      audio.channels[c][n] = v;
    }
  }
  return audio;
}

void write_wav(const std::string& path, const Audio& audio, WavFormat fmt) {
  if (audio.channels.empty()) throw std::runtime_error("write_wav: no channels");
  const int D = audio.num_channels();
  const long N = audio.num_samples();
  for (const auto& ch : audio.channels)
    if (static_cast<long>(ch.size()) != N)
      throw std::runtime_error("write_wav: channel length mismatch");

  const int bytes_per = (fmt == WavFormat::Pcm16) ? 2 : 4;
  const uint32_t data_len = static_cast<uint32_t>(N * D * bytes_per);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, fmt == WavFormat::Pcm16 ? 1 : 3);
  put_u16(out, static_cast<uint16_t>(D));
  put_u32(out, static_cast<uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<uint32_t>(audio.sample_rate * D * bytes_per));
  put_u16(out, static_cast<uint16_t>(D * bytes_per));
  put_u16(out, static_cast<uint16_t>(8 * bytes_per));
  out += "data";
  put_u32(out, data_len);

  for (long n = 0; n < N; ++n) {
    for (int c = 0; c < D; ++c) {
      double v = audio.channels[c][n];
      if (fmt == WavFormat::Pcm16) {
        double clipped = std::max(-1.0, std::min(1.0, v));
        int16_t iv = static_cast<int16_t>(
            std::max(-32768.0, std::min(32767.0, clipped * 32768.0)));
        put_u16(out, static_cast<uint16_t>(iv));
      } else {
        float fv = static_cast<float>(v);
        uint32_t bits;
        std::memcpy(&bits, &fv, 4);
        put_u32(out, bits);
      }
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write WAV file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace derev
