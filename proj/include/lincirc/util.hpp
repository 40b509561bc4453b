#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lincirc {

// Error with a machine-parsable class tag, reported by the CLI as
// "<error_class>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& message)
      : std::runtime_error(message), class_(std::move(error_class)) {}
  const std::string& error_class() const { return class_; }

 private:
  std::string class_;
};

[[noreturn]] inline void fail(const char* error_class, const std::string& message) {
  throw Error(error_class, message);
}

// FNV-1a over arbitrary bytes. Used for manifests and artifact fingerprints;
// deterministic, not cryptographic.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// Parallelism cap: LINCIRC_THREADS env var, else hardware limit.
int thread_budget();

// Sets the BLAS thread count (process-global).
void set_blas_threads(int n);

}  // namespace lincirc
