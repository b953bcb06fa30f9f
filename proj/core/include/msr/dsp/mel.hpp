#pragma once

#include <vector>

namespace msr::dsp {

double hz_to_mel(double hz);   // 2595 * log10(1 + f/700)
double mel_to_hz(double mel);

// Triangular filterbank on the mel scale, rows [n_mels x (n_fft/2 + 1)].
// Peaks are 1 (no area normalization). Throws ConfigError if the frequency
// range is invalid or the resolution leaves some filter with no FFT bin.
std::vector<std::vector<float>> mel_filterbank(int n_mels, int n_fft,
                                               int sample_rate, double f_min,
                                               double f_max);

}  // namespace msr::dsp
