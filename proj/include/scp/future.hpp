#pragma once

#include <chrono>
#include <condition_variable>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "errors.hpp"

namespace scp {

// Single-assignment future/promise. Futures are shareable and awaitable from
// any thread; a promise completes at most once (later completions are
// quietly dropped, which resolves the timeout-vs-late-reply race).
template <class T>
class Future;

namespace detail {

template <class T>
struct FutureState {
  std::mutex m;
  std::condition_variable cv;
  bool done = false;
  std::optional<T> value;
  std::exception_ptr error;
  std::vector<std::function<void()>> callbacks;
};

}  // namespace detail

template <class T>
class Promise {
 public:
  Promise() : st_(std::make_shared<detail::FutureState<T>>()) {}

  Future<T> future() const { return Future<T>(st_); }

  bool set_value(T v) {
    return complete([&](detail::FutureState<T>& s) { s.value = std::move(v); });
  }

  bool set_error(std::exception_ptr e) {
    return complete([&](detail::FutureState<T>& s) { s.error = std::move(e); });
  }

  bool set_error(const Error& e) { return set_error(std::make_exception_ptr(e)); }

  bool completed() const {
    std::lock_guard lk(st_->m);
    return st_->done;
  }

 private:
  template <class F>
  bool complete(F&& fill) {
    std::vector<std::function<void()>> cbs;
    {
      std::lock_guard lk(st_->m);
      if (st_->done) return false;
      fill(*st_);
      st_->done = true;
      cbs.swap(st_->callbacks);
    }
    st_->cv.notify_all();
    for (auto& cb : cbs) cb();
    return true;
  }

  std::shared_ptr<detail::FutureState<T>> st_;
};

template <class T>
class Future {
 public:
  Future() = default;
  explicit Future(std::shared_ptr<detail::FutureState<T>> st) : st_(std::move(st)) {}

  bool valid() const { return st_ != nullptr; }

  bool ready() const {
    std::lock_guard lk(st_->m);
    return st_->done;
  }

  void wait() const {
    std::unique_lock lk(st_->m);
    st_->cv.wait(lk, [&] { return st_->done; });
  }

  template <class Rep, class Period>
  bool wait_for(std::chrono::duration<Rep, Period> d) const {
    std::unique_lock lk(st_->m);
    return st_->cv.wait_for(lk, d, [&] { return st_->done; });
  }

  // Blocks until completion; rethrows the stored error if any. Returns a
  // copy so the result stays valid past any temporary future (take() moves
  // instead).
  T get() const {
    std::unique_lock lk(st_->m);
    st_->cv.wait(lk, [&] { return st_->done; });
    if (st_->error) std::rethrow_exception(st_->error);
    return *st_->value;
  }

  T take() {
    std::unique_lock lk(st_->m);
    st_->cv.wait(lk, [&] { return st_->done; });
    if (st_->error) std::rethrow_exception(st_->error);
    T out = std::move(*st_->value);
    st_->value.reset();
    return out;
  }

  // Runs cb once the future completes (immediately if it already has).
  void on_ready(std::function<void()> cb) const {
    {
      std::unique_lock lk(st_->m);
      if (!st_->done) {
        st_->callbacks.push_back(std::move(cb));
        return;
      }
    }
    cb();
  }

  // Derived future holding f(*this) once this completes. The mapper gets a
  // reference to the stored value, alive for the duration of the call.
  template <class U, class F>
  Future<U> map(F f) const {
    Promise<U> p;
    Future<T> self = *this;
    on_ready([self, p, f = std::move(f)]() mutable {
      try {
        if (self.st_->error) std::rethrow_exception(self.st_->error);
        p.set_value(f(*self.st_->value));
      } catch (...) {
        p.set_error(std::current_exception());
      }
    });
    return p.future();
  }

 private:
  std::shared_ptr<detail::FutureState<T>> st_;
};

}  // namespace scp
