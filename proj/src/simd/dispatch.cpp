#include <cstdlib>
#include <string>

#include "nst/errors.hpp"
#include "nst/simd/kernels.hpp"

namespace nst::simd {

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(NST_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_available(isa)) {
    throw PreconditionError("SIMD variant '" + std::string(isa_name(isa)) +
                            "' is not available on this CPU/build");
  }
#if defined(NST_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("NST_SIMD")) {
    const std::string want(forced);
    if (want == "scalar") return table_for(Isa::scalar);
    if (want == "avx2" && isa_available(Isa::avx2)) return table_for(Isa::avx2);
  }
  return isa_available(Isa::avx2) ? table_for(Isa::avx2) : table_for(Isa::scalar);
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

}  // namespace nst::simd
