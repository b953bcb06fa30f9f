#include "msr/fx/chain.hpp"

#include <fmt/format.h>

#include <cmath>

#include "msr/common.hpp"
#include "msr/io_util.hpp"

namespace msr::fx {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Range range_from(const json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ConfigError(fmt::format("degradation config: '{}' must be [lo, hi]", key));
  Range r{a[0].get<double>(), a[1].get<double>()};
  if (r.lo > r.hi)
    throw ConfigError(fmt::format("degradation config: '{}' range is inverted", key));
  return r;
}

json range_to(const Range& r) { return json::array({r.lo, r.hi}); }

EqParams::Type eq_type_from(const std::string& s) {
  if (s == "peaking") return EqParams::Type::Peaking;
  if (s == "low_shelf") return EqParams::Type::LowShelf;
  if (s == "high_shelf") return EqParams::Type::HighShelf;
  throw ConfigError(fmt::format("degradation config: unknown eq type '{}'", s));
}

std::string eq_type_to(EqParams::Type t) {
  switch (t) {
    case EqParams::Type::Peaking: return "peaking";
    case EqParams::Type::LowShelf: return "low_shelf";
    case EqParams::Type::HighShelf: return "high_shelf";
  }
  return "?";
}

double prob_from(const json& j) {
  const double p = j.value("prob", 0.0);
  if (p < 0.0 || p > 1.0)
    throw ConfigError("degradation config: prob must be in [0, 1]");
  return p;
}

ordered_json effect_params_json(const EffectOp& op) {
  ordered_json o;
  switch (op.kind) {
    case EffectKind::Eq: {
      const auto& p = std::get<EqParams>(op.params);
      o["type"] = eq_type_to(p.type);
      o["center_hz"] = p.center_hz;
      o["gain_db"] = p.gain_db;
      o["q"] = p.q;
      break;
    }
    case EffectKind::Compressor: {
      const auto& p = std::get<CompressorParams>(op.params);
      o["threshold_db"] = p.threshold_db;
      o["ratio"] = p.ratio;
      o["attack_ms"] = p.attack_ms;
      o["release_ms"] = p.release_ms;
      o["makeup_db"] = p.makeup_db;
      break;
    }
    case EffectKind::Reverb: {
      const auto& p = std::get<ReverbParams>(op.params);
      o["decay_s"] = p.decay_s;
      o["wet"] = p.wet;
      o["seed"] = p.seed;
      break;
    }
    case EffectKind::Saturator:
      o["drive"] = std::get<SaturatorParams>(op.params).drive;
      break;
    case EffectKind::StereoWidener:
      o["width"] = std::get<WidenerParams>(op.params).width;
      break;
    case EffectKind::Limiter: {
      const auto& p = std::get<LimiterParams>(op.params);
      o["ceiling_db"] = p.ceiling_db;
      o["lookahead_ms"] = p.lookahead_ms;
      o["release_ms"] = p.release_ms;
      break;
    }
    case EffectKind::CodecSim: {
      const auto& p = std::get<CodecSimParams>(op.params);
      o["cutoff_hz"] = p.cutoff_hz;
      o["bits"] = p.bits;
      o["frame_size"] = p.frame_size;
      break;
    }
  }
  return o;
}

}  // namespace

void MasterChain::validate() const {
  if (ops.empty() || ops.back().kind != EffectKind::Limiter)
    throw ConfigError("master chain must end in a limiter");
}

double MasterChain::ceiling_db() const {
  validate();
  return std::get<LimiterParams>(ops.back().params).ceiling_db;
}

dsp::Waveform MasterChain::apply(const dsp::Waveform& wave) const {
  validate();
  dsp::Waveform out = wave;
  for (const auto& op : ops) out = apply_effect(out, op);
  return out;
}

const StemFxConfig& DegradationConfig::for_stem(const std::string& stem_class) const {
  auto it = stem_classes.find(stem_class);
  if (it != stem_classes.end()) return it->second;
  it = stem_classes.find("default");
  if (it == stem_classes.end())
    throw ConfigError("degradation config: missing 'default' stem class");
  return it->second;
}

void DegradationConfig::validate() const {
  if (!stem_classes.count("default"))
    throw ConfigError("degradation config: missing 'default' stem class");
  if (stem_gain_db.lo > stem_gain_db.hi)
    throw ConfigError("degradation config: gain range inverted");
  for (const auto& [name, fx] : stem_classes) {
    for (double p : {fx.eq.prob, fx.compressor.prob, fx.saturator.prob,
                     fx.reverb.prob, fx.stereo_widener.prob})
      if (p < 0.0 || p > 1.0)
        throw ConfigError(fmt::format(
            "degradation config: stem class '{}' has a probability outside [0, 1]", name));
    if (fx.eq.types.empty())
      throw ConfigError(fmt::format(
          "degradation config: stem class '{}' lists no eq types", name));
  }
  master.validate();
}

DegradationConfig DegradationConfig::defaults() {
  DegradationConfig cfg;
  StemFxConfig fx;
  fx.eq.prob = 0.5;
  fx.eq.types = {EqParams::Type::Peaking, EqParams::Type::LowShelf,
                 EqParams::Type::HighShelf};
  fx.compressor.prob = 0.4;
  fx.saturator.prob = 0.25;
  fx.reverb.prob = 0.3;
  fx.stereo_widener.prob = 0.2;
  cfg.stem_classes["default"] = fx;
  cfg.master.ops.push_back({EffectKind::Limiter, LimiterParams{-1.0, 5.0, 50.0}});
  return cfg;
}

DegradationConfig DegradationConfig::from_json(const json& j) {
  const int version = j.value("schema_version", -1);
  if (version != kSchemaVersion)
    throw ConfigError(fmt::format(
        "degradation config: schema_version {} unsupported (expected {})",
        version, kSchemaVersion));
  DegradationConfig cfg;
  cfg.stem_gain_db = range_from(j, "stem_gain_db", cfg.stem_gain_db);

  if (!j.contains("stem_classes") || !j.at("stem_classes").is_object())
    throw ConfigError("degradation config: missing 'stem_classes' object");
  for (const auto& [name, body] : j.at("stem_classes").items()) {
    StemFxConfig fx;
    if (body.contains("eq")) {
      const auto& e = body.at("eq");
      fx.eq.prob = prob_from(e);
      fx.eq.center_hz = range_from(e, "center_hz", fx.eq.center_hz);
      fx.eq.gain_db = range_from(e, "gain_db", fx.eq.gain_db);
      fx.eq.q = range_from(e, "q", fx.eq.q);
      if (e.contains("types")) {
        fx.eq.types.clear();
        for (const auto& t : e.at("types"))
          fx.eq.types.push_back(eq_type_from(t.get<std::string>()));
      }
    }
    if (body.contains("compressor")) {
      const auto& c = body.at("compressor");
      fx.compressor.prob = prob_from(c);
      fx.compressor.threshold_db = range_from(c, "threshold_db", fx.compressor.threshold_db);
      fx.compressor.ratio = range_from(c, "ratio", fx.compressor.ratio);
      fx.compressor.attack_ms = range_from(c, "attack_ms", fx.compressor.attack_ms);
      fx.compressor.release_ms = range_from(c, "release_ms", fx.compressor.release_ms);
      fx.compressor.makeup_db = range_from(c, "makeup_db", fx.compressor.makeup_db);
    }
    if (body.contains("saturator")) {
      const auto& s = body.at("saturator");
      fx.saturator.prob = prob_from(s);
      fx.saturator.drive = range_from(s, "drive", fx.saturator.drive);
    }
    if (body.contains("reverb")) {
      const auto& r = body.at("reverb");
      fx.reverb.prob = prob_from(r);
      fx.reverb.decay_s = range_from(r, "decay_s", fx.reverb.decay_s);
      fx.reverb.wet = range_from(r, "wet", fx.reverb.wet);
    }
    if (body.contains("stereo_widener")) {
      const auto& w = body.at("stereo_widener");
      fx.stereo_widener.prob = prob_from(w);
      fx.stereo_widener.width = range_from(w, "width", fx.stereo_widener.width);
    }
    cfg.stem_classes[name] = fx;
  }

  if (j.contains("master")) {
    const auto& m = j.at("master");
    if (m.contains("eq")) {
      EqParams p;
      p.type = eq_type_from(m.at("eq").value("type", "peaking"));
      p.center_hz = m.at("eq").value("center_hz", p.center_hz);
      p.gain_db = m.at("eq").value("gain_db", p.gain_db);
      p.q = m.at("eq").value("q", p.q);
      cfg.master.ops.push_back({EffectKind::Eq, p});
    }
    if (m.contains("compressor")) {
      const auto& c = m.at("compressor");
      CompressorParams p;
      p.threshold_db = c.value("threshold_db", p.threshold_db);
      p.ratio = c.value("ratio", p.ratio);
      p.attack_ms = c.value("attack_ms", p.attack_ms);
      p.release_ms = c.value("release_ms", p.release_ms);
      p.makeup_db = c.value("makeup_db", p.makeup_db);
      cfg.master.ops.push_back({EffectKind::Compressor, p});
    }
    if (m.contains("codec_sim")) {
      const auto& c = m.at("codec_sim");
      CodecSimParams p;
      p.cutoff_hz = c.value("cutoff_hz", p.cutoff_hz);
      p.bits = c.value("bits", p.bits);
      p.frame_size = c.value("frame_size", p.frame_size);
      cfg.master.ops.push_back({EffectKind::CodecSim, p});
    }
    LimiterParams lim;
    if (m.contains("limiter")) {
      const auto& l = m.at("limiter");
      lim.ceiling_db = l.value("ceiling_db", lim.ceiling_db);
      lim.lookahead_ms = l.value("lookahead_ms", lim.lookahead_ms);
      lim.release_ms = l.value("release_ms", lim.release_ms);
    }
    cfg.master.ops.push_back({EffectKind::Limiter, lim});
  } else {
    cfg.master.ops.push_back({EffectKind::Limiter, LimiterParams{}});
  }
  cfg.validate();
  return cfg;
}

DegradationConfig DegradationConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
  return from_json(j);
}

ordered_json DegradationConfig::to_json() const {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["rng_scheme"] = CounterRng::kScheme;
  j["stem_gain_db"] = range_to(stem_gain_db);
  auto& classes = j["stem_classes"] = ordered_json::object();
  for (const auto& [name, fx] : stem_classes) {
    ordered_json o;
    ordered_json eq;
    eq["prob"] = fx.eq.prob;
    auto types = ordered_json::array();
    for (auto t : fx.eq.types) types.push_back(eq_type_to(t));
    eq["types"] = types;
    eq["center_hz"] = range_to(fx.eq.center_hz);
    eq["gain_db"] = range_to(fx.eq.gain_db);
    eq["q"] = range_to(fx.eq.q);
    o["eq"] = eq;
    ordered_json comp;
    comp["prob"] = fx.compressor.prob;
    comp["threshold_db"] = range_to(fx.compressor.threshold_db);
    comp["ratio"] = range_to(fx.compressor.ratio);
    comp["attack_ms"] = range_to(fx.compressor.attack_ms);
    comp["release_ms"] = range_to(fx.compressor.release_ms);
    comp["makeup_db"] = range_to(fx.compressor.makeup_db);
    o["compressor"] = comp;
    o["saturator"] = {{"prob", fx.saturator.prob}, {"drive", range_to(fx.saturator.drive)}};
    o["reverb"] = {{"prob", fx.reverb.prob},
                   {"decay_s", range_to(fx.reverb.decay_s)},
                   {"wet", range_to(fx.reverb.wet)}};
    o["stereo_widener"] = {{"prob", fx.stereo_widener.prob},
                           {"width", range_to(fx.stereo_widener.width)}};
    classes[name] = o;
  }
  ordered_json m;
  for (const auto& op : master.ops) m[to_string(op.kind)] = effect_params_json(op);
  j["master"] = m;
  return j;
}

dsp::Waveform DegradationChain::apply(const dsp::Waveform& wave) const {
  dsp::Waveform out = wave;
  for (const auto& op : ops) {
    if (op.kind == EffectKind::StereoWidener && wave.channels == 1) {
      log_debug(fmt::format("chain for '{}': skipping stereo_widener on mono stem", stem_class));
      continue;
    }
    out = apply_effect(out, op);
  }
  return out;
}

nlohmann::ordered_json DegradationChain::to_json() const {
  ordered_json j;
  j["stem_class"] = stem_class;
  j["seed"] = seed;
  auto ops_json = ordered_json::array();
  for (const auto& op : ops) {
    ordered_json o;
    o["kind"] = to_string(op.kind);
    o["params"] = effect_params_json(op);
    ops_json.push_back(o);
  }
  j["ops"] = ops_json;
  return j;
}

DegradationChain sample_chain(uint64_t global_seed, const std::string& track_id,
                              const std::string& stem_class,
                              const DegradationConfig& cfg) {
  const StemFxConfig& fx = cfg.for_stem(stem_class);
  DegradationChain chain;
  chain.stem_class = stem_class;
  chain.seed = CounterRng::derive_key(global_seed, track_id, stem_class);
  CounterRng rng = CounterRng(chain.seed).split("chain");

  // Fixed order and fixed draw layout per effect (inclusion bit first, then
  // every parameter, consumed whether or not the effect is included).
  {
    const bool on = rng.bernoulli(fx.eq.prob);
    EqParams p;
    p.type = fx.eq.types[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(fx.eq.types.size()) - 1))];
    p.center_hz = fx.eq.center_hz.sample(rng);
    p.gain_db = fx.eq.gain_db.sample(rng);
    p.q = fx.eq.q.sample(rng);
    if (on) chain.ops.push_back({EffectKind::Eq, p});
  }
  {
    const bool on = rng.bernoulli(fx.compressor.prob);
    CompressorParams p;
    p.threshold_db = fx.compressor.threshold_db.sample(rng);
    p.ratio = fx.compressor.ratio.sample(rng);
    p.attack_ms = fx.compressor.attack_ms.sample(rng);
    p.release_ms = fx.compressor.release_ms.sample(rng);
    p.makeup_db = fx.compressor.makeup_db.sample(rng);
    if (on) chain.ops.push_back({EffectKind::Compressor, p});
  }
  {
    const bool on = rng.bernoulli(fx.saturator.prob);
    SaturatorParams p;
    p.drive = fx.saturator.drive.sample(rng);
    if (on) chain.ops.push_back({EffectKind::Saturator, p});
  }
  {
    const bool on = rng.bernoulli(fx.reverb.prob);
    ReverbParams p;
    p.decay_s = fx.reverb.decay_s.sample(rng);
    p.wet = fx.reverb.wet.sample(rng);
    p.seed = rng.next_u64();
    if (on) chain.ops.push_back({EffectKind::Reverb, p});
  }
  {
    const bool on = rng.bernoulli(fx.stereo_widener.prob);
    WidenerParams p;
    p.width = fx.stereo_widener.width.sample(rng);
    if (on) chain.ops.push_back({EffectKind::StereoWidener, p});
  }
  return chain;
}

double sample_stem_gain_db(uint64_t global_seed, const std::string& track_id,
                           const std::string& stem_class,
                           const DegradationConfig& cfg) {
  CounterRng rng =
      CounterRng(CounterRng::derive_key(global_seed, track_id, stem_class)).split("gain");
  return cfg.stem_gain_db.sample(rng);
}

SynthesisResult synthesize_mixture(const StemSet& stems, uint64_t global_seed,
                                   const std::string& track_id,
                                   const DegradationConfig& cfg,
                                   const MasterChain& master) {
  if (stems.empty()) throw ShapeError("synthesize_mixture: no stems");
  const auto& first = stems.begin()->second;
  for (const auto& [name, w] : stems)
    if (w.num_frames() != first.num_frames() || w.sample_rate != first.sample_rate ||
        w.channels != first.channels)
      throw ShapeError(fmt::format(
          "synthesize_mixture: stem '{}' layout differs from the rest", name));

  SynthesisResult result;
  dsp::Waveform sum(first.channels, first.num_frames(), first.sample_rate);
  for (const auto& [name, clean] : stems) {
    DegradationChain chain = sample_chain(global_seed, track_id, name, cfg);
    dsp::Waveform degraded = chain.apply(clean);
    const double gain_db = sample_stem_gain_db(global_seed, track_id, name, cfg);
    degraded = dsp::scaled(degraded, static_cast<float>(std::pow(10.0, gain_db / 20.0)));
    sum = dsp::mix(sum, degraded);
    result.chains.emplace(name, std::move(chain));
    result.gains_db[name] = gain_db;
    result.degraded_stems.emplace(name, std::move(degraded));
  }
  result.mixture = master.apply(sum);
  return result;
}

}  // namespace msr::fx
