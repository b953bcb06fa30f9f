#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace msr {

// Writes via a temp file in the same directory plus rename, so an interrupted
// run never leaves a partial data file behind.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& bytes);
void atomic_write_file(const std::filesystem::path& path, const void* data,
                       size_t len);

std::string read_file(const std::filesystem::path& path);
uint64_t file_checksum(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Items must be
// independent; exceptions are captured and rethrown (first by index) so
// failures behave the same regardless of job count.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn);

}  // namespace msr
