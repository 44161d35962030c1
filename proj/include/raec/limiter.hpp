#pragma once

#include <condition_variable>
#include <cstddef>
#include <mutex>

namespace raec {

/// Caps the number of concurrent holders. Acquire through `Permit`.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

  class Permit {
   public:
    explicit Permit(InFlightLimiter& l) : limiter_(l) { limiter_.acquire(); }
    ~Permit() { limiter_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    InFlightLimiter& limiter_;
  };

  std::size_t limit() const noexcept { return limit_; }

  std::size_t in_flight() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return in_flight_;
  }

 private:
  void acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [this] { return in_flight_ < limit_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  const std::size_t limit_;
  std::size_t in_flight_ = 0;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
};

}  // namespace raec
