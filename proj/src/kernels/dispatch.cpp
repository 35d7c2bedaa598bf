#include <cstdlib>
#include <stdexcept>
#include <string>

#include "qmsan/kernels.hpp"

namespace qmsan::kern {

namespace scalar {
extern const Ops kOps;
}
#if defined(QMSAN_HAVE_AVX2)
namespace avx2 {
extern const Ops kOps;
}
#endif

namespace {

bool cpu_has_avx2() {
#if defined(QMSAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* resolve() {
  const char* env = std::getenv("QMSAN_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &scalar::kOps;
#if defined(QMSAN_HAVE_AVX2)
  if (want == "avx2") {
    if (!cpu_has_avx2()) throw std::runtime_error("QMSAN_SIMD=avx2 but CPU lacks AVX2/FMA");
    return &avx2::kOps;
  }
  if (want == "auto" && cpu_has_avx2()) return &avx2::kOps;
#else
  if (want == "avx2") throw std::runtime_error("QMSAN_SIMD=avx2 but AVX2 support not compiled in");
#endif
  return &scalar::kOps;
}

}  // namespace

bool available(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return cpu_has_avx2();
  }
  return false;
}

const Ops& ops(Backend backend) {
  if (backend == Backend::Scalar) return scalar::kOps;
#if defined(QMSAN_HAVE_AVX2)
  if (backend == Backend::Avx2 && cpu_has_avx2()) return avx2::kOps;
#endif
  throw std::runtime_error("requested kernel backend is unavailable");
}

const Ops& active() {
  static const Ops* table = resolve();
  return *table;
}

std::string active_name() { return active().name; }

}  // namespace qmsan::kern
