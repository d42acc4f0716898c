#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "phagoq/error.hpp"
#include "phagoq/ingest/dataset.hpp"

namespace phagoq::ingest {

enum class SceneStatus { Ok, Failed, Skipped };

template <typename R>
struct SceneResult {
  std::string condition;
  std::string scene_id;
  SceneStatus status = SceneStatus::Skipped;
  std::optional<R> value;
  std::string error;
};

// Runs `work` once per manifest on up to `workers` threads. Results come back
// in manifest order regardless of completion order. An exception from one
// scene is recorded in its result and does not affect the others; invalid
// manifests fail without calling `work`. When `stop` becomes true no new
// scenes are started and the remaining ones are marked Skipped.
template <typename R>
std::vector<SceneResult<R>> run_scenes(const std::vector<SceneManifest>& manifests,
                                       const std::function<R(const SceneManifest&)>& work, int workers,
                                       const std::atomic<bool>* stop = nullptr) {
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
  std::vector<SceneResult<R>> results(manifests.size());
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    results[i].condition = manifests[i].condition;
    results[i].scene_id = manifests[i].scene_id;
  }
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (;;) {
      if (stop != nullptr && stop->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= manifests.size()) return;
      SceneResult<R>& r = results[i];
      if (!manifests[i].valid) {
        r.status = SceneStatus::Failed;
        r.error = "invalid scene: " + manifests[i].reason;
        continue;
      }
      try {
        r.value.emplace(work(manifests[i]));
        r.status = SceneStatus::Ok;
      } catch (const std::exception& e) {
        r.status = SceneStatus::Failed;
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), manifests.size());
  if (n_threads <= 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(drain);
  }
  return results;
}

}  // namespace phagoq::ingest
