#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msr {

// Canonical sample rate for the whole pipeline. Inputs must already match;
// resampling is out of scope.
inline constexpr int kSampleRate = 44100;

// The eight instrument classes plus the auxiliary "other" stem.
const std::vector<std::string>& instrument_stems();
const std::vector<std::string>& all_stems();       // instruments + "other"
const std::vector<std::string>& base_four_stems(); // vocals, drums, bass, other
bool is_known_stem(std::string_view id);

// Error taxonomy. The CLI maps each class to a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

// FNV-1a, used for seed derivation and parameter checksums.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(uint64_t v);

// Minimal stderr logger. Level comes from the MSR_LOG environment variable
// (debug|info|warn|error|off), default warn.
enum class LogLevel { Debug = 0, Info, Warn, Error, Off };
LogLevel log_level();
void set_log_level(LogLevel level);
void log_msg(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::Warn, m); }
inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }

}  // namespace msr
