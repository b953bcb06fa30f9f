#include "msr/common.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace msr {

const std::vector<std::string>& instrument_stems() {
  static const std::vector<std::string> kStems = {
      "vocals", "guitar", "keyboard", "synthesizer",
      "bass",   "drums",  "percussion", "orchestra"};
  return kStems;
}

const std::vector<std::string>& all_stems() {
  static const std::vector<std::string> kStems = [] {
    auto v = instrument_stems();
    v.push_back("other");
    return v;
  }();
  return kStems;
}

const std::vector<std::string>& base_four_stems() {
  static const std::vector<std::string> kStems = {"vocals", "drums", "bass",
                                                  "other"};
  return kStems;
}

bool is_known_stem(std::string_view id) {
  const auto& stems = all_stems();
  return std::find(stems.begin(), stems.end(), id) != stems.end();
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(std::string_view s, uint64_t seed) {
  return fnv1a64(s.data(), s.size(), seed);
}

std::string hex64(uint64_t v) { return fmt::format("{:016x}", v); }

namespace {

LogLevel parse_level(const char* s) {
  std::string v = s ? s : "";
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "warn" || v == "warning") return LogLevel::Warn;
  if (v == "error") return LogLevel::Error;
  if (v == "off" || v == "silent" || v == "none") return LogLevel::Off;
  return LogLevel::Warn;
}

LogLevel g_level = parse_level(std::getenv("MSR_LOG"));
std::mutex g_log_mutex;

const char* level_tag(LogLevel l) {
  switch (l) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    default: return "?";
  }
}

}  // namespace

LogLevel log_level() { return g_level; }
void set_log_level(LogLevel level) { g_level = level; }

void log_msg(LogLevel level, const std::string& msg) {
  if (level < g_level || g_level == LogLevel::Off) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[msr:" << level_tag(level) << "] " << msg << "\n";
}

}  // namespace msr
