#pragma once

#include <string>
#include <vector>

namespace derev {

// Planar multichannel audio. WAV files store channels interleaved; we
// deinterleave on load.
struct Audio {
  int sample_rate = 16000;
  std::vector<std::vector<double>> channels;

  int num_channels() const { return static_cast<int>(channels.size()); }
  long num_samples() const {
    return channels.empty() ? 0 : static_cast<long>(channels[0].size());
  }
};

enum class WavFormat { Pcm16, Float32 };

Audio read_wav(const std::string& path);
void write_wav(const std::string& path, const Audio& audio,
               WavFormat format = WavFormat::Float32);

}  // namespace derev
