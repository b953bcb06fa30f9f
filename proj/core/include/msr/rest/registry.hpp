#pragma once

#include <map>
#include <string>

#include "msr/rest/bundle.hpp"
#include "msr/stem_set.hpp"

namespace msr::rest {

// Instrument-specific restoration experts, routed by known stem identity.
// Routing is total: any stem without an expert gets the generalist.
struct ExpertRegistry {
  RestorationBundle generalist;
  std::map<std::string, RestorationBundle> experts;
};

const RestorationBundle& route(const std::string& stem_id,
                               const ExpertRegistry& registry);

// Restores the eight instrument stems through their routed bundles; the
// auxiliary "other" stem passes through unchanged.
StemSet restore_all(const StemSet& stems, const ExpertRegistry& registry);

// Directory layout: index.json + one checkpoint file per bundle.
void save_registry(const std::filesystem::path& dir, const ExpertRegistry& registry);
ExpertRegistry load_registry(const std::filesystem::path& dir);

}  // namespace msr::rest
