// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_PARALLEL_HPP
#define SHAPEUQ_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shapeuq
{

// Runs fn(i) for i in [0, n) on up to `threads` workers using a static block
// partition. Each index must only write to its own output slot; any ordering of
// side effects is then irrelevant and results do not depend on the worker count.
// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn &&fn)
{
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; i++)
    {
      fn(i);
    }
    return;
  }

  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; w++)
  {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back(
        [&, begin, end]()
        {
          try
          {
            for (std::size_t i = begin; i < end; i++)
            {
              fn(i);
            }
          }
          catch (...)
          {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error)
            {
              error = std::current_exception();
            }
          }
        });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  if (error)
  {
    std::rethrow_exception(error);
  }
}

}  // namespace shapeuq

#endif  // SHAPEUQ_PARALLEL_HPP
