#ifndef HCR_COMMON_ALLOC_H_
#define HCR_COMMON_ALLOC_H_

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace hcr {

// Keeps multi-megabyte activation buffers on the heap instead of a fresh
// mmap per tensor; training otherwise spends a quarter of its time in
// page faults. No-op outside glibc.
inline void TuneAllocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

}  // namespace hcr

#endif  // HCR_COMMON_ALLOC_H_
