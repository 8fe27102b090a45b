#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sqsafe {

/// Fixed set of threads running one batch at a time. Task k of a batch
/// always runs on worker k % size(), so per-task state stays with one
/// thread across batches. The calling thread acts as worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return workers_; }

  /// Runs fn(k) for k in [0, count) and blocks until all calls return.
  /// The first exception thrown by a task is rethrown here.
  void run(int count, const std::function<void(int)>& fn);

 private:
  void worker_loop(int id);
  void run_share(int id);

  int workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int count_ = 0;
  unsigned long generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace sqsafe
