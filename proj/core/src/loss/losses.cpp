#include "msr/loss/losses.hpp"

#include <fmt/format.h>

#include <cmath>

#include "msr/common.hpp"

namespace msr::loss {

namespace {

constexpr double kTinyEnergy = 1e-30;
constexpr double kScNumEps = 1e-24;
const double kDbPerLn = 10.0 / std::log(10.0);

void check_same_layout(const dsp::Waveform& est, const dsp::Waveform& ref) {
  if (est.channels != ref.channels || est.num_frames() != ref.num_frames())
    throw ShapeError(fmt::format(
        "waveform layouts differ: {}ch/{} vs {}ch/{}", est.channels,
        est.num_frames(), ref.channels, ref.num_frames()));
}

int64_t frame_len_samples(const dsp::Waveform& ref, double frame_ms) {
  const auto len = static_cast<int64_t>(std::lround(frame_ms * ref.sample_rate / 1000.0));
  return std::max<int64_t>(1, len);
}

// Flat sample indices (channel-major) of frames matching `want_active`.
std::vector<int64_t> frame_sample_indices(const dsp::Waveform& ref,
                                          const std::vector<bool>& active,
                                          int64_t frame_len, bool want_active) {
  const int64_t n = ref.num_frames();
  std::vector<int64_t> idx;
  for (int c = 0; c < ref.channels; ++c) {
    const int64_t base = c * n;
    for (size_t f = 0; f < active.size(); ++f) {
      if (active[f] != want_active) continue;
      const int64_t lo = static_cast<int64_t>(f) * frame_len;
      const int64_t hi = std::min<int64_t>(lo + frame_len, n);
      for (int64_t i = lo; i < hi; ++i) idx.push_back(base + i);
    }
  }
  return idx;
}

}  // namespace

void LossWeights::validate() const {
  if (si_snr < 0 || mrstft < 0 || l1 < 0 || low_amp < 0)
    throw ConfigError("loss weights must be nonnegative");
  if (si_snr + mrstft + l1 + low_amp <= 0)
    throw ConfigError("at least one loss weight must be positive");
}

std::vector<dsp::StftConfig> default_mrstft_configs() {
  return {
      {512, 128, dsp::WindowKind::Hann, true},
      {1024, 256, dsp::WindowKind::Hann, true},
      {2048, 512, dsp::WindowKind::Hann, true},
  };
}

std::vector<bool> active_frames(const dsp::Waveform& ref, double frame_ms,
                                double threshold_db) {
  const int64_t n = ref.num_frames();
  const int64_t flen = frame_len_samples(ref, frame_ms);
  const int64_t frames = (n + flen - 1) / flen;
  const double threshold = std::pow(10.0, threshold_db / 20.0);
  std::vector<bool> active(frames);
  for (int64_t f = 0; f < frames; ++f) {
    const int64_t lo = f * flen, hi = std::min(lo + flen, n);
    double acc = 0.0;
    for (int c = 0; c < ref.channels; ++c) {
      auto ch = ref.channel(c);
      for (int64_t i = lo; i < hi; ++i) acc += static_cast<double>(ch[i]) * ch[i];
    }
    const double rms = std::sqrt(acc / static_cast<double>((hi - lo) * ref.channels));
    active[f] = rms >= threshold;
  }
  return active;
}

double si_snr_db(const dsp::Waveform& est, const dsp::Waveform& ref) {
  check_same_layout(est, ref);
  double dot = 0.0, rr = 0.0;
  for (size_t i = 0; i < ref.samples.size(); ++i) {
    dot += static_cast<double>(est.samples[i]) * ref.samples[i];
    rr += static_cast<double>(ref.samples[i]) * ref.samples[i];
  }
  if (rr <= kTinyEnergy)
    throw NumericError("si_snr: reference is silent (undefined)");
  const double a = dot / rr;
  double ss = 0.0, ee = 0.0;
  for (size_t i = 0; i < ref.samples.size(); ++i) {
    const double s = a * ref.samples[i];
    const double e = est.samples[i] - s;
    ss += s * s;
    ee += e * e;
  }
  const double db = kDbPerLn * (std::log(ss + kTinyEnergy) - std::log(ee + kTinyEnergy));
  return std::clamp(db, -kSiSnrCapDb, kSiSnrCapDb);
}

MaskedSiSnr masked_si_snr_db(const dsp::Waveform& est, const dsp::Waveform& ref,
                             double frame_ms, double threshold_db) {
  check_same_layout(est, ref);
  const auto active = active_frames(ref, frame_ms, threshold_db);
  const int64_t flen = frame_len_samples(ref, frame_ms);
  const auto idx = frame_sample_indices(ref, active, flen, /*want_active=*/true);
  if (idx.empty()) return {kSiSnrCapDb, true};

  dsp::Waveform e(1, static_cast<int64_t>(idx.size()), ref.sample_rate);
  dsp::Waveform r(1, static_cast<int64_t>(idx.size()), ref.sample_rate);
  for (size_t i = 0; i < idx.size(); ++i) {
    e.samples[i] = est.samples[idx[i]];
    r.samples[i] = ref.samples[idx[i]];
  }
  return {si_snr_db(e, r), false};
}

double multires_stft_loss(const dsp::Waveform& est, const dsp::Waveform& ref,
                          std::span<const dsp::StftConfig> configs) {
  check_same_layout(est, ref);
  if (configs.empty()) throw ConfigError("multires_stft_loss: no configs");
  double total = 0.0;
  for (const auto& cfg : configs) {
    const auto se = dsp::stft(est, cfg);
    const auto sr = dsp::stft(ref, cfg);
    double num = 0.0, den = 0.0, log_l1 = 0.0;
    for (size_t i = 0; i < sr.data.size(); ++i) {
      const double mr = std::abs(std::complex<double>(sr.data[i]));
      const double me = std::abs(std::complex<double>(se.data[i]));
      num += (mr - me) * (mr - me);
      den += mr * mr;
      log_l1 += std::fabs(std::log(me + kLogMagEps) - std::log(mr + kLogMagEps));
    }
    const double sc = std::sqrt(num + kScNumEps) / std::sqrt(den + kScNumEps);
    total += sc + log_l1 / static_cast<double>(sr.data.size());
  }
  return total / static_cast<double>(configs.size());
}

double l1_loss(const dsp::Waveform& est, const dsp::Waveform& ref) {
  check_same_layout(est, ref);
  if (est.samples.empty()) throw ShapeError("l1_loss: empty waveforms");
  double acc = 0.0;
  for (size_t i = 0; i < est.samples.size(); ++i)
    acc += std::fabs(static_cast<double>(est.samples[i]) - ref.samples[i]);
  return acc / static_cast<double>(est.samples.size());
}

double low_amplitude_penalty(const dsp::Waveform& est, const dsp::Waveform& ref,
                             double frame_ms, double threshold_db) {
  check_same_layout(est, ref);
  const auto active = active_frames(ref, frame_ms, threshold_db);
  const int64_t flen = frame_len_samples(ref, frame_ms);
  const auto idx = frame_sample_indices(ref, active, flen, /*want_active=*/false);
  if (idx.empty()) return 0.0;
  double acc = 0.0;
  for (int64_t i : idx) acc += std::fabs(est.samples[i]);
  return acc / static_cast<double>(idx.size());
}

double combined_loss(const StemSet& est, const StemSet& ref,
                     const LossWeights& weights,
                     std::span<const dsp::StftConfig> configs, double frame_ms,
                     double threshold_db) {
  weights.validate();
  if (est.size() != ref.size() || est.empty())
    throw ShapeError(fmt::format("combined_loss: stem sets differ ({} vs {})",
                                 est.size(), ref.size()));
  double total = 0.0;
  for (const auto& [stem, ref_wave] : ref) {
    auto it = est.find(stem);
    if (it == est.end())
      throw ShapeError(fmt::format("combined_loss: estimate missing stem '{}'", stem));
    const auto& est_wave = it->second;
    double term = 0.0;
    if (weights.si_snr > 0)
      term -= weights.si_snr *
              masked_si_snr_db(est_wave, ref_wave, frame_ms, threshold_db).db / kSiSnrCapDb;
    if (weights.mrstft > 0)
      term += weights.mrstft * multires_stft_loss(est_wave, ref_wave, configs);
    if (weights.l1 > 0) term += weights.l1 * l1_loss(est_wave, ref_wave);
    if (weights.low_amp > 0)
      term += weights.low_amp *
              low_amplitude_penalty(est_wave, ref_wave, frame_ms, threshold_db);
    total += term;
  }
  return total / static_cast<double>(ref.size());
}

// --- tape builders ---------------------------------------------------------

namespace {

void check_graph_inputs(nn::Tape& tape, const std::vector<NodeId>& est,
                        const dsp::Waveform& ref) {
  if (est.size() != static_cast<size_t>(ref.channels))
    throw ShapeError("graph loss: channel count mismatch");
  for (NodeId id : est)
    if (tape.value(id).size() != ref.num_frames())
      throw ShapeError("graph loss: estimate/reference length mismatch");
}

nn::Tensor channel_tensor(const dsp::Waveform& w, int c) {
  auto ch = w.channel(c);
  return nn::Tensor({static_cast<int64_t>(ch.size())},
                    std::vector<float>(ch.begin(), ch.end()));
}

}  // namespace

NodeId graph_l1_loss(nn::Tape& tape, const std::vector<NodeId>& est,
                     const dsp::Waveform& ref) {
  check_graph_inputs(tape, est, ref);
  NodeId total = nn::Tape::kNone;
  for (int c = 0; c < ref.channels; ++c) {
    NodeId diff = tape.sub(est[c], tape.constant(channel_tensor(ref, c)));
    NodeId s = tape.sum(tape.abs(diff));
    total = total == nn::Tape::kNone ? s : tape.add(total, s);
  }
  return tape.scale(total, 1.0 / static_cast<double>(ref.samples.size()));
}

NodeId graph_masked_si_snr(nn::Tape& tape, const std::vector<NodeId>& est,
                           const dsp::Waveform& ref, double frame_ms,
                           double threshold_db) {
  check_graph_inputs(tape, est, ref);
  const auto active = active_frames(ref, frame_ms, threshold_db);
  const int64_t flen = frame_len_samples(ref, frame_ms);

  // per-channel active indices (channel offset removed)
  const int64_t n = ref.num_frames();
  std::vector<int64_t> ch_idx;
  for (size_t f = 0; f < active.size(); ++f) {
    if (!active[f]) continue;
    const int64_t lo = static_cast<int64_t>(f) * flen;
    const int64_t hi = std::min<int64_t>(lo + flen, n);
    for (int64_t i = lo; i < hi; ++i) ch_idx.push_back(i);
  }
  if (ch_idx.empty()) return tape.constant(nn::Tensor::scalar(static_cast<float>(kSiSnrCapDb)));

  double rr = 0.0;
  std::vector<NodeId> est_act(ref.channels), ref_act(ref.channels);
  for (int c = 0; c < ref.channels; ++c) {
    auto ch = ref.channel(c);
    std::vector<float> rvals(ch_idx.size());
    for (size_t i = 0; i < ch_idx.size(); ++i) {
      rvals[i] = ch[ch_idx[i]];
      rr += static_cast<double>(rvals[i]) * rvals[i];
    }
    ref_act[c] = tape.constant(
        nn::Tensor({static_cast<int64_t>(ch_idx.size())}, std::move(rvals)));
    est_act[c] = tape.gather(est[c], ch_idx);
  }
  if (rr <= kTinyEnergy)
    throw NumericError("masked_si_snr: active reference frames carry no energy");

  NodeId alpha = nn::Tape::kNone;  // <est, ref> over all active samples
  for (int c = 0; c < ref.channels; ++c) {
    NodeId d = tape.dot(est_act[c], ref_act[c]);
    alpha = alpha == nn::Tape::kNone ? d : tape.add(alpha, d);
  }
  NodeId proj = tape.scale(alpha, 1.0 / rr);
  NodeId ss = nn::Tape::kNone, ee = nn::Tape::kNone;
  for (int c = 0; c < ref.channels; ++c) {
    NodeId s = tape.scale_by(proj, ref_act[c]);
    NodeId e = tape.sub(est_act[c], s);
    NodeId ssc = tape.dot(s, s);
    NodeId eec = tape.dot(e, e);
    ss = ss == nn::Tape::kNone ? ssc : tape.add(ss, ssc);
    ee = ee == nn::Tape::kNone ? eec : tape.add(ee, eec);
  }
  NodeId db = tape.scale(tape.sub(tape.log(ss, kTinyEnergy), tape.log(ee, kTinyEnergy)),
                         kDbPerLn);
  return tape.clamp(db, -kSiSnrCapDb, kSiSnrCapDb);
}

NodeId graph_multires_stft(nn::Tape& tape, const std::vector<NodeId>& est,
                           const dsp::Waveform& ref,
                           std::span<const dsp::StftConfig> configs) {
  check_graph_inputs(tape, est, ref);
  if (configs.empty()) throw ConfigError("graph_multires_stft: no configs");
  NodeId total = nn::Tape::kNone;
  for (const auto& cfg : configs) {
    const auto ref_spec = dsp::stft(ref, cfg);
    double den = 0.0;
    int64_t count = 0;
    NodeId num = nn::Tape::kNone;     // sum of (|R|-|E|)^2
    NodeId log_l1 = nn::Tape::kNone;  // sum |log|E| - log|R||
    for (int c = 0; c < ref.channels; ++c) {
      // constant reference magnitudes for this channel
      nn::Tensor rmag({ref_spec.frames, ref_spec.bins});
      for (int64_t t = 0; t < ref_spec.frames; ++t)
        for (int k = 0; k < ref_spec.bins; ++k) {
          const double m = std::abs(std::complex<double>(ref_spec.at(c, t, k)));
          rmag[t * ref_spec.bins + k] = static_cast<float>(m);
          den += m * m;
        }
      count += rmag.size();
      NodeId rmag_node = tape.constant(rmag);
      NodeId emag = tape.magnitude(tape.stft_ri(est[c], cfg));
      NodeId diff = tape.sub(rmag_node, emag);
      NodeId sq = tape.sum(tape.mul(diff, diff));
      num = num == nn::Tape::kNone ? sq : tape.add(num, sq);
      NodeId ld = tape.abs(tape.sub(tape.log(emag, kLogMagEps),
                                    tape.log(rmag_node, kLogMagEps)));
      NodeId ls = tape.sum(ld);
      log_l1 = log_l1 == nn::Tape::kNone ? ls : tape.add(log_l1, ls);
    }
    NodeId sc = tape.scale(tape.sqrt(num, kScNumEps), 1.0 / std::sqrt(den + kScNumEps));
    NodeId term = tape.add(sc, tape.scale(log_l1, 1.0 / static_cast<double>(count)));
    total = total == nn::Tape::kNone ? term : tape.add(total, term);
  }
  return tape.scale(total, 1.0 / static_cast<double>(configs.size()));
}

NodeId graph_low_amplitude_penalty(nn::Tape& tape, const std::vector<NodeId>& est,
                                   const dsp::Waveform& ref, double frame_ms,
                                   double threshold_db) {
  check_graph_inputs(tape, est, ref);
  const auto active = active_frames(ref, frame_ms, threshold_db);
  const int64_t flen = frame_len_samples(ref, frame_ms);
  const int64_t n = ref.num_frames();
  std::vector<int64_t> ch_idx;
  for (size_t f = 0; f < active.size(); ++f) {
    if (active[f]) continue;
    const int64_t lo = static_cast<int64_t>(f) * flen;
    const int64_t hi = std::min<int64_t>(lo + flen, n);
    for (int64_t i = lo; i < hi; ++i) ch_idx.push_back(i);
  }
  if (ch_idx.empty()) return tape.constant(nn::Tensor::scalar(0.0f));
  NodeId total = nn::Tape::kNone;
  for (int c = 0; c < ref.channels; ++c) {
    NodeId s = tape.sum(tape.abs(tape.gather(est[c], ch_idx)));
    total = total == nn::Tape::kNone ? s : tape.add(total, s);
  }
  return tape.scale(total, 1.0 / static_cast<double>(ch_idx.size() * ref.channels));
}

NodeId graph_combined_term(nn::Tape& tape, const std::vector<NodeId>& est,
                           const dsp::Waveform& ref, const LossWeights& weights,
                           std::span<const dsp::StftConfig> configs,
                           double frame_ms, double threshold_db) {
  weights.validate();
  NodeId total = nn::Tape::kNone;
  auto accum = [&](NodeId term, double w) {
    NodeId scaled = tape.scale(term, w);
    total = total == nn::Tape::kNone ? scaled : tape.add(total, scaled);
  };
  if (weights.si_snr > 0)
    accum(graph_masked_si_snr(tape, est, ref, frame_ms, threshold_db),
          -weights.si_snr / kSiSnrCapDb);
  if (weights.mrstft > 0)
    accum(graph_multires_stft(tape, est, ref, configs), weights.mrstft);
  if (weights.l1 > 0) accum(graph_l1_loss(tape, est, ref), weights.l1);
  if (weights.low_amp > 0)
    accum(graph_low_amplitude_penalty(tape, est, ref, frame_ms, threshold_db),
          weights.low_amp);
  return total;
}

}  // namespace msr::loss
