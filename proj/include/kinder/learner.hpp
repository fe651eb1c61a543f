#pragma once

#include <cstdint>
#include <string>

#include "kinder/tasks.hpp"

namespace kinder {

/// The per-tick contract: one input symbol plus the side-band reward in,
/// exactly one output symbol out.
class Learner {
public:
  virtual ~Learner() = default;

  virtual char next(char input, int reward) = 0;
  virtual void on_session_start(std::uint64_t /*seed*/) {}
  virtual void on_session_end() {}
  virtual std::string name() const = 0;
  /// False exempts the learner from the per-call wall-clock budget (humans).
  virtual bool timed() const { return true; }
};

/// What the session exposes to validation learners about the running
/// episode. Pointers stay valid until the next call; `instance` is null
/// during time off.
struct EpisodeView {
  std::size_t index = 0;
  std::uint64_t start_tick = 0;
  const TaskInstance* instance = nullptr;
  const Teacher* teacher = nullptr;
  const World* world = nullptr;
};

/// Side door for validation-only learners. The session calls it whenever an
/// episode starts; ordinary learners never see it.
class EpisodeAware {
public:
  virtual ~EpisodeAware() = default;
  virtual void on_episode(const EpisodeView& view) = 0;
};

}  // namespace kinder
