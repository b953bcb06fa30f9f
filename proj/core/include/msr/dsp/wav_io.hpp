#pragma once

#include <filesystem>

#include "msr/dsp/waveform.hpp"

namespace msr::dsp {

enum class WavFormat { Pcm16, Pcm24, Float32 };

// RIFF/WAVE reader supporting PCM16, PCM24 and IEEE float32 (plain and
// WAVE_FORMAT_EXTENSIBLE). Integer samples are scaled to [-1, 1).
Waveform load_wav(const std::filesystem::path& path);

// Errors if the file's sample rate differs from expected_rate.
Waveform load_wav(const std::filesystem::path& path, int expected_rate);

// Atomic write (temp + rename). Float32 is the pipeline default since it
// round-trips samples bit-exactly.
void save_wav(const std::filesystem::path& path, const Waveform& wave,
              WavFormat format = WavFormat::Float32);

}  // namespace msr::dsp
