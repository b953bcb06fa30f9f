#pragma once

#include <map>
#include <string>

#include "msr/dsp/waveform.hpp"

namespace msr {

// Named stems of one track. std::map keeps iteration order deterministic.
using StemSet = std::map<std::string, dsp::Waveform>;

}  // namespace msr
