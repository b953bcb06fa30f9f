#include <fmt/format.h>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/io_util.hpp"
#include "msr/sep/model.hpp"

namespace fs = std::filesystem;

namespace msr::cli {

void cmd_separate(const SeparateArgs& args) {
  const sep::SeparatorModel model = sep::SeparatorModel::load(args.checkpoint);
  if (model.heads.size() != 4 && model.heads.size() != 9)
    throw ConfigError(fmt::format(
        "{}: expected a 4- or 9-head separator, got {} heads", args.checkpoint,
        model.heads.size()));
  const auto wavs = collect_wavs(args.inputs);
  const fs::path out_dir(args.common.out_dir);
  fs::create_directories(out_dir);

  parallel_for(wavs.size(), args.common.jobs, [&](size_t i) {
    const fs::path& in = wavs[i];
    const std::string track = track_of_mixture(in);
    const dsp::Waveform mixture = dsp::load_wav(in, model.hparams.sample_rate);
    const StemSet stems = sep::separate(mixture, model);
    for (const auto& [stem, wave] : stems)
      dsp::save_wav(out_dir / fmt::format("{}_{}.wav", track, stem), wave);
    log_info(fmt::format("separate: {} -> {} stems", in.string(), stems.size()));
  });
}

}  // namespace msr::cli
