#include "msr/sep/train.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "msr/common.hpp"
#include "msr/nn/graph.hpp"

namespace msr::sep {

namespace {

using nn::Tape;
using nn::Tensor;

std::vector<std::string> new_stems_of(const SeparatorModel& model) {
  std::vector<std::string> out;
  const auto& base = base_four_stems();
  for (const auto& stem : model.stem_ids)
    if (std::find(base.begin(), base.end(), stem) == base.end()) out.push_back(stem);
  return out;
}

}  // namespace

StagePlan make_stage_plan(int stage, const SeparatorModel& model) {
  StagePlan plan;
  plan.stage = stage;
  switch (stage) {
    case 1:
    case 2:
      if (model.heads.size() != 4)
        throw ConfigError(fmt::format(
            "stage {} expects a 4-head model, got {} heads", stage, model.heads.size()));
      plan.data_mode = stage == 1 ? StagePlan::DataMode::Clean
                                  : StagePlan::DataMode::Degraded;
      plan.trainable_selectors = {"lora"};
      break;
    case 3: {
      if (model.heads.size() != 9)
        throw ConfigError(fmt::format(
            "stage 3 expects a 9-head model, got {} heads", model.heads.size()));
      plan.data_mode = StagePlan::DataMode::Degraded;
      for (const auto& stem : new_stems_of(model))
        plan.trainable_selectors.push_back("head." + stem);
      break;
    }
    default:
      throw ConfigError(fmt::format("stage must be 1, 2 or 3, got {}", stage));
  }
  return plan;
}

void apply_stage_plan(SeparatorModel& model, const StagePlan& plan) {
  // freeze everything, then re-enable per selector
  model.backbone_trainable = false;
  model.lora_trainable = false;
  for (auto& enc : model.band_encoders) enc.trainable = false;
  for (auto& blk : model.blocks) {
    for (auto* aw : {&blk.time_attn, &blk.band_attn})
      for (auto* l : {&aw->q, &aw->k, &aw->v, &aw->out}) l->trainable = false;
    blk.ff.in.trainable = false;
    blk.ff.out.trainable = false;
  }
  for (auto& head : model.heads) {
    head.trainable = false;
    for (auto& l : head.hidden) l.trainable = false;
    for (auto& l : head.output) l.trainable = false;
  }
  for (const auto& sel : plan.trainable_selectors) {
    if (sel == "lora") {
      if (!model.has_lora())
        throw ConfigError("stage plan selects LoRA but no adapters are attached");
      model.lora_trainable = true;
    } else if (sel.rfind("head.", 0) == 0) {
      const int idx = model.head_index(sel.substr(5));
      if (idx < 0)
        throw ConfigError(fmt::format("stage plan selects unknown head '{}'", sel));
      auto& head = model.heads[static_cast<size_t>(idx)];
      head.trainable = true;
      for (auto& l : head.hidden) l.trainable = true;
      for (auto& l : head.output) l.trainable = true;
    } else {
      throw ConfigError(fmt::format("unknown trainable selector '{}'", sel));
    }
  }
}

namespace {

// per-example constants reused across steps (legal: the backbone is frozen)
struct PreparedExample {
  std::vector<Tensor> band_feats;    // [channel * bands + b] -> [frames x dim]
  std::vector<Tensor> mix_ri;        // per channel [frames x 2*bins]
  int channels = 0;
  int64_t num_samples = 0;
  const StemSet* targets = nullptr;
};

struct HeadParams {
  std::string stem;
  int head_idx;
  // node ids per band: hidden w/b, output w/b (filled per step)
  std::vector<Tape::NodeId> hw, hb, ow, ob;
};

}  // namespace

std::vector<double> train_heads_stage3(SeparatorModel& model,
                                       const std::vector<TrainExample>& dataset,
                                       const TrainOptions& opts) {
  if (dataset.empty()) throw ConfigError("train_heads_stage3: empty dataset");
  if (opts.steps < 1) throw ConfigError("train_heads_stage3: steps must be >= 1");
  opts.weights.validate();
  if (model.has_lora())
    throw ConfigError("train_heads_stage3: merge LoRA adapters first");

  // stems we will supervise; each needs a head, and updates require it trainable
  std::vector<std::string> train_stems;
  for (const auto& ex : dataset) {
    if (ex.targets.empty())
      throw ConfigError("train_heads_stage3: example without targets");
    for (const auto& [stem, wave] : ex.targets) {
      const int idx = model.head_index(stem);
      if (idx < 0)
        throw ConfigError(fmt::format("train_heads_stage3: no head for target stem '{}'", stem));
      if (wave.num_frames() != ex.mixture.num_frames() ||
          wave.channels != ex.mixture.channels)
        throw ShapeError(fmt::format(
            "train_heads_stage3: target '{}' layout differs from mixture", stem));
      if (model.heads[static_cast<size_t>(idx)].trainable &&
          std::find(train_stems.begin(), train_stems.end(), stem) == train_stems.end())
        train_stems.push_back(stem);
    }
  }
  if (train_stems.empty())
    throw ConfigError("train_heads_stage3: no trainable head receives a target");

  const dsp::StftConfig cfg = model.hparams.stft();
  const int bands = model.scheme.num_bands();
  const int dim = model.scheme.dim;

  // precompute frozen-backbone features and mixture spectra
  std::vector<PreparedExample> prepared;
  prepared.reserve(dataset.size());
  for (const auto& ex : dataset) {
    PreparedExample pe;
    pe.channels = ex.mixture.channels;
    pe.num_samples = ex.mixture.num_frames();
    pe.targets = &ex.targets;
    const auto spec = dsp::stft(ex.mixture, cfg);
    for (int c = 0; c < pe.channels; ++c) {
      const Tensor feats = backbone_forward(band_split(spec, model, c), model);
      for (int b = 0; b < bands; ++b) {
        Tensor slice({spec.frames, dim});
        for (int64_t t = 0; t < spec.frames; ++t)
          std::copy(feats.data() + (t * bands + b) * dim,
                    feats.data() + (t * bands + b) * dim + dim, slice.row(t).begin());
        pe.band_feats.push_back(std::move(slice));
      }
      Tensor ri({spec.frames, 2 * spec.bins});
      for (int64_t t = 0; t < spec.frames; ++t) {
        auto row = ri.row(t);
        for (int k = 0; k < spec.bins; ++k) {
          const auto v = spec.at(c, t, k);
          row[2 * k] = v.real();
          row[2 * k + 1] = v.imag();
        }
      }
      pe.mix_ri.push_back(std::move(ri));
    }
    prepared.push_back(std::move(pe));
  }

  // snapshot of the trainable parameters before the most recent update, so a
  // non-finite loss can roll back to the last state that evaluated finite
  std::vector<Tensor> rollback;
  auto snapshot = [&] {
    rollback.clear();
    for (const auto& stem : train_stems) {
      const auto& head = model.heads[static_cast<size_t>(model.head_index(stem))];
      for (int b = 0; b < bands; ++b) {
        rollback.push_back(head.hidden[b].weight);
        rollback.push_back(*head.hidden[b].bias);
        rollback.push_back(head.output[b].weight);
        rollback.push_back(*head.output[b].bias);
      }
    }
  };
  auto restore_snapshot = [&] {
    size_t i = 0;
    for (const auto& stem : train_stems) {
      auto& head = model.heads[static_cast<size_t>(model.head_index(stem))];
      for (int b = 0; b < bands; ++b) {
        head.hidden[b].weight = rollback[i++];
        *head.hidden[b].bias = rollback[i++];
        head.output[b].weight = rollback[i++];
        *head.output[b].bias = rollback[i++];
      }
    }
  };

  std::vector<double> history;
  history.reserve(opts.steps);
  for (int step = 0; step < opts.steps; ++step) {
    Tape tape;

    // leaves for the trainable head parameters
    std::vector<HeadParams> head_params;
    std::map<std::string, Tape::NodeId> param_nodes;
    for (const auto& stem : train_stems) {
      HeadParams hp;
      hp.stem = stem;
      hp.head_idx = model.head_index(stem);
      auto& head = model.heads[static_cast<size_t>(hp.head_idx)];
      for (int b = 0; b < bands; ++b) {
        hp.hw.push_back(tape.param(head.hidden[b].weight, true));
        hp.hb.push_back(tape.param(*head.hidden[b].bias, true));
        hp.ow.push_back(tape.param(head.output[b].weight, true));
        hp.ob.push_back(tape.param(*head.output[b].bias, true));
        param_nodes[fmt::format("{}.b{}.hw", stem, b)] = hp.hw.back();
        param_nodes[fmt::format("{}.b{}.hb", stem, b)] = hp.hb.back();
        param_nodes[fmt::format("{}.b{}.ow", stem, b)] = hp.ow.back();
        param_nodes[fmt::format("{}.b{}.ob", stem, b)] = hp.ob.back();
      }
      head_params.push_back(std::move(hp));
    }

    Tape::NodeId total = Tape::kNone;
    for (const auto& pe : prepared) {
      Tape::NodeId example_loss = Tape::kNone;
      int stem_count = 0;
      for (const auto& [stem, target] : *pe.targets) {
        const auto hp_it = std::find_if(head_params.begin(), head_params.end(),
                                        [&](const HeadParams& h) { return h.stem == stem; });
        std::vector<Tape::NodeId> est_channels;
        for (int c = 0; c < pe.channels; ++c) {
          std::vector<Tape::NodeId> parts;
          for (int b = 0; b < bands; ++b) {
            Tape::NodeId x = tape.constant(pe.band_feats[c * bands + b]);
            Tape::NodeId y;
            if (hp_it != head_params.end()) {
              y = tape.linear(x, hp_it->hw[b], hp_it->hb[b]);
              y = tape.gelu(y);
              y = tape.linear(y, hp_it->ow[b], hp_it->ob[b]);
            } else {  // frozen head: constant parameters
              const auto& head = model.heads[static_cast<size_t>(model.head_index(stem))];
              y = tape.linear(x, tape.constant(head.hidden[b].weight),
                              tape.constant(*head.hidden[b].bias));
              y = tape.gelu(y);
              y = tape.linear(y, tape.constant(head.output[b].weight),
                              tape.constant(*head.output[b].bias));
            }
            parts.push_back(y);
          }
          Tape::NodeId mask = tape.concat_cols(parts);
          Tape::NodeId est_spec = tape.complex_mask_apply(mask, pe.mix_ri[c]);
          est_channels.push_back(tape.istft_ri(est_spec, cfg, pe.num_samples));
        }
        Tape::NodeId term = loss::graph_combined_term(
            tape, est_channels, target, opts.weights, opts.mrstft_configs,
            opts.frame_ms, opts.silence_threshold_db);
        example_loss = example_loss == Tape::kNone ? term : tape.add(example_loss, term);
        ++stem_count;
      }
      Tape::NodeId mean_loss = tape.scale(example_loss, 1.0 / stem_count);
      total = total == Tape::kNone ? mean_loss : tape.add(total, mean_loss);
    }
    Tape::NodeId loss = tape.scale(total, 1.0 / static_cast<double>(prepared.size()));

    const double loss_value = tape.scalar_value(loss);
    if (!std::isfinite(loss_value)) {
      if (!rollback.empty()) restore_snapshot();
      throw NumericError(fmt::format(
          "train_heads_stage3: non-finite loss at step {} (last good loss {}); "
          "parameters rolled back",
          step, history.empty() ? 0.0 : history.back()));
    }
    history.push_back(loss_value);

    if (opts.lr == 0.0) continue;  // evaluation only; parameters stay put

    snapshot();
    tape.backward(loss);
    auto grads = tape.gradients(param_nodes);

    double scale = 1.0;
    if (opts.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& [_, g] : grads)
        for (int64_t i = 0; i < g.size(); ++i) sq += static_cast<double>(g[i]) * g[i];
      const double norm = std::sqrt(sq);
      if (norm > opts.clip_norm) scale = opts.clip_norm / norm;
    }
    for (auto& hp : head_params) {
      auto& head = model.heads[static_cast<size_t>(hp.head_idx)];
      for (int b = 0; b < bands; ++b) {
        auto update = [&](Tensor& p, const std::string& key) {
          const Tensor& g = grads.at(key);
          for (int64_t i = 0; i < p.size(); ++i)
            p[i] -= static_cast<float>(opts.lr * scale * g[i]);
        };
        update(head.hidden[b].weight, fmt::format("{}.b{}.hw", hp.stem, b));
        update(*head.hidden[b].bias, fmt::format("{}.b{}.hb", hp.stem, b));
        update(head.output[b].weight, fmt::format("{}.b{}.ow", hp.stem, b));
        update(*head.output[b].bias, fmt::format("{}.b{}.ob", hp.stem, b));
      }
    }
  }
  return history;
}

}  // namespace msr::sep
