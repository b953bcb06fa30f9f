#include <fmt/format.h>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/io_util.hpp"
#include "msr/rest/registry.hpp"

namespace fs = std::filesystem;

namespace msr::cli {

void cmd_restore(const RestoreArgs& args) {
  const rest::ExpertRegistry registry = rest::load_registry(args.registry_dir);
  const auto wavs = collect_wavs(args.inputs);
  const fs::path out_dir(args.common.out_dir);
  fs::create_directories(out_dir);

  parallel_for(wavs.size(), args.common.jobs, [&](size_t i) {
    const fs::path& in = wavs[i];
    const auto [track, stem] = parse_track_stem(in);
    if (!registry.experts.count(stem))
      log_info(fmt::format("restore: no '{}' expert, routing {} to the generalist",
                           stem, in.filename().string()));
    const dsp::Waveform wave =
        dsp::load_wav(in, registry.generalist.hparams.sample_rate);
    const dsp::Waveform restored = rest::restore(wave, rest::route(stem, registry));
    dsp::save_wav(out_dir / in.filename(), restored);
  });
  log_info(fmt::format("restore: {} stems -> {}", wavs.size(), out_dir.string()));
}

}  // namespace msr::cli
