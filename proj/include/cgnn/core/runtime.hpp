#pragma once

namespace cgnn {

// Keeps the multi-hundred-kilobyte activation buffers of a training step on
// the heap instead of fresh mmap/munmap pairs per allocation. Call once at
// program start; a no-op outside glibc.
void tune_allocator();

}  // namespace cgnn
