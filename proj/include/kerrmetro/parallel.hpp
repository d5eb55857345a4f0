// Copyright 2026 The kerrmetro Authors.

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kerrmetro {

/// Number of workers to use when the caller passes 0.
inline unsigned default_thread_count() {
    return std::max(1U, std::thread::hardware_concurrency());
}

/// Run fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; callers write into per-index slots, so results do
/// not depend on scheduling. The first exception is rethrown after all
/// workers have joined.
template <typename Fn> void parallel_for(std::size_t count, unsigned threads, Fn &&fn) {
    if (threads == 0) {
        threads = default_thread_count();
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        const std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace kerrmetro
