#include "dsse/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace dsse::kernels {

#ifdef DSSE_HAVE_AVX2
namespace detail {
const Ops& avx2_impl();
}
#endif

bool avx2_supported() {
#if defined(DSSE_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* avx2_ops() {
#ifdef DSSE_HAVE_AVX2
    return &detail::avx2_impl();
#else
    return nullptr;
#endif
}

const Ops& active_ops() {
    static const Ops& selected = []() -> const Ops& {
        const char* want = std::getenv("DSSE_KERNELS");
        if (want != nullptr) {
            if (std::strcmp(want, "scalar") == 0) return scalar_ops();
            if (std::strcmp(want, "avx2") == 0 && avx2_supported())
                return *avx2_ops();
        }
        if (avx2_supported()) return *avx2_ops();
        return scalar_ops();
    }();
    return selected;
}

} // namespace dsse::kernels
