#pragma once

#include <atomic>
#include <exception>
#include <mutex>

namespace cpelab {

// Exceptions must not escape an OpenMP loop body; this captures the first one
// thrown by any iteration so the caller can rethrow it on its own thread.
// Once an iteration fails, remaining iterations become no-ops.
class ParallelGuard {
public:
    template <class F>
    void run(F&& body) noexcept {
        if (failed_.load(std::memory_order_relaxed)) return;
        try {
            body();
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu_);
            if (!error_) error_ = std::current_exception();
            failed_.store(true, std::memory_order_relaxed);
        }
    }

    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mu_;
    std::atomic<bool> failed_{false};
    std::exception_ptr error_;
};

}  // namespace cpelab
