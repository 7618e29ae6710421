#pragma once

#include <chrono>

namespace defamekit {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_ms() const = 0;
};

class SteadyClock final : public Clock {
 public:
  double now_ms() const override {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
  }
};

// Simulated time. Mock backends advance it by their scripted latencies so
// timing-dependent logic runs instantly and reproducibly.
class VirtualClock final : public Clock {
 public:
  double now_ms() const override { return now_; }
  void advance(double ms) { now_ += ms; }

 private:
  double now_ = 0.0;
};

}  // namespace defamekit
