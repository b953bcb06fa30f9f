#pragma once

#include <span>
#include <vector>

#include "msr/dsp/stft.hpp"
#include "msr/nn/graph.hpp"
#include "msr/stem_set.hpp"

namespace msr::loss {

inline constexpr double kSiSnrCapDb = 100.0;
inline constexpr double kDefaultSilenceDb = -60.0;  // frame RMS threshold, dBFS
inline constexpr double kDefaultFrameMs = 50.0;
inline constexpr double kLogMagEps = 1e-7;

struct LossWeights {
  double si_snr = 1.0;
  double mrstft = 1.0;
  double l1 = 1.0;
  double low_amp = 1.0;
  void validate() const;  // nonnegative, at least one positive
};

// Resolutions used by the multi-resolution STFT loss (and the round-trip
// acceptance checks).
std::vector<dsp::StftConfig> default_mrstft_configs();

// Scale-invariant SNR in dB, clamped to [-100, 100]. No mean removal: the
// estimate is projected straight onto the reference.
double si_snr_db(const dsp::Waveform& est, const dsp::Waveform& ref);

struct MaskedSiSnr {
  double db = 0.0;
  bool all_silent = false;  // no reference frame was active
};

// SI-SNR over the concatenation of frames whose reference RMS is at or above
// the threshold. Frame activity is judged across channels.
MaskedSiSnr masked_si_snr_db(const dsp::Waveform& est, const dsp::Waveform& ref,
                             double frame_ms = kDefaultFrameMs,
                             double threshold_db = kDefaultSilenceDb);

// Mean over configs of spectral convergence plus L1 of natural-log magnitudes
// (eps 1e-7). The convergence denominator is epsilon-guarded for silent refs.
double multires_stft_loss(const dsp::Waveform& est, const dsp::Waveform& ref,
                          std::span<const dsp::StftConfig> configs);

double l1_loss(const dsp::Waveform& est, const dsp::Waveform& ref);

// Mean |est| over samples in reference-silent frames; 0 when none are silent.
double low_amplitude_penalty(const dsp::Waveform& est, const dsp::Waveform& ref,
                             double frame_ms = kDefaultFrameMs,
                             double threshold_db = kDefaultSilenceDb);

// Mean over stems of
//   -w_si * masked_si_snr/100 + w_mr * mrstft + w_l1 * l1 + w_lap * lap
// (SI-SNR negated and normalized by the cap so every term is minimized).
double combined_loss(const StemSet& est, const StemSet& ref,
                     const LossWeights& weights,
                     std::span<const dsp::StftConfig> configs,
                     double frame_ms = kDefaultFrameMs,
                     double threshold_db = kDefaultSilenceDb);

// Frame activity of a reference signal; one flag per analysis frame.
std::vector<bool> active_frames(const dsp::Waveform& ref, double frame_ms,
                                double threshold_db);

// --- tape builders -------------------------------------------------------
// Differentiable versions of each term, for the head-training path. `est`
// holds one [n] node per channel; `ref` is constant. Values match the eager
// functions (same epsilons, same cap).
using NodeId = nn::Tape::NodeId;

NodeId graph_l1_loss(nn::Tape& tape, const std::vector<NodeId>& est,
                     const dsp::Waveform& ref);
NodeId graph_masked_si_snr(nn::Tape& tape, const std::vector<NodeId>& est,
                           const dsp::Waveform& ref,
                           double frame_ms = kDefaultFrameMs,
                           double threshold_db = kDefaultSilenceDb);
NodeId graph_multires_stft(nn::Tape& tape, const std::vector<NodeId>& est,
                           const dsp::Waveform& ref,
                           std::span<const dsp::StftConfig> configs);
NodeId graph_low_amplitude_penalty(nn::Tape& tape, const std::vector<NodeId>& est,
                                   const dsp::Waveform& ref,
                                   double frame_ms = kDefaultFrameMs,
                                   double threshold_db = kDefaultSilenceDb);
// The per-stem combined term (callers average over stems).
NodeId graph_combined_term(nn::Tape& tape, const std::vector<NodeId>& est,
                           const dsp::Waveform& ref, const LossWeights& weights,
                           std::span<const dsp::StftConfig> configs,
                           double frame_ms = kDefaultFrameMs,
                           double threshold_db = kDefaultSilenceDb);

}  // namespace msr::loss
