#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace metafilter {

/// Training allocates and frees the same large activation buffers every
/// batch. glibc serves those with mmap and returns them on free, so each
/// batch pays for fresh zeroed pages. Keeping them on the heap removes that
/// cost. Call once at program start; a no-op on other C libraries.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
}

}  // namespace metafilter
