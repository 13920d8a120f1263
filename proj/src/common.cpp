#include "nam/common.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace nam {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("NAM_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    const std::string v(env);
    if (v == "debug") return LogLevel::kDebug;
    if (v == "info") return LogLevel::kInfo;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "error") return LogLevel::kError;
    return LogLevel::kWarn;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (level < log_level()) return;
  static std::mutex mu;
  static const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[nam:" << names[static_cast<int>(level)] << "] " << message << "\n";
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

}  // namespace nam
