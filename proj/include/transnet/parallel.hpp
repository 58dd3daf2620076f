#pragma once

namespace transnet {

/// Number of worker threads OpenMP regions will use from this thread.
int thread_count();

/// Threads available on this machine, honouring TRANSNET_THREADS when set.
int default_thread_count();

/// Sets the OpenMP thread count for the calling thread and restores the
/// previous value on destruction. A count < 1 leaves the setting unchanged.
class ScopedThreadCount {
 public:
    explicit ScopedThreadCount(int threads);
    ~ScopedThreadCount();
    ScopedThreadCount(const ScopedThreadCount&) = delete;
    ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
    int previous_;
};

}  // namespace transnet
