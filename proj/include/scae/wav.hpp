#pragma once

#include <filesystem>
#include <vector>

namespace scae::data {

/// Reads 16-bit PCM mono 16 kHz RIFF/WAVE, samples scaled by 1/32768.
/// Anything else is rejected with a FormatError naming the offending field.
std::vector<float> load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono 16 kHz; samples are clamped to [-1, 1].
void save_wav(const std::filesystem::path& path, const std::vector<float>& samples,
              int sample_rate = 16000);

}  // namespace scae::data
