#include <algorithm>

#include "kinder/tasks.hpp"

namespace kinder {

std::string_view verdict_name(Verdict verdict) {
  switch (verdict) {
    case Verdict::Pending: return "pending";
    case Verdict::Accept: return "accept";
    case Verdict::Reject: return "reject";
  }
  return "unknown";
}

Progress judge(const TaskInstance& instance, std::span<const EpisodeEvent> events, std::uint64_t now) {
  if (events.empty() || events.front().kind != EpisodeEvent::Kind::Start) {
    throw std::invalid_argument("episode log must open with a Start event");
  }
  const auto& steps = instance.steps;
  const std::uint64_t start = events.front().tick;

  std::size_t last_expect = steps.size();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (is_expect(steps[i])) last_expect = i;
  }

  Progress p;
  p.activated_at = start;
  BodyState state = events.front().state;
  std::vector<const EpisodeEvent*> actions;

  auto decide = [&](Verdict verdict, std::uint64_t tick) {
    p.verdict = verdict;
    p.decided_at = tick;
  };
  auto activate = [&](std::uint64_t tick) {
    p.activated_at = tick;
    actions.clear();
  };
  auto advance = [&](std::uint64_t tick) {
    ++p.step;
    activate(tick);
  };
  auto settle = [&](std::uint64_t tick) {
    while (p.verdict != Verdict::Reject && p.step < steps.size()) {
      const Step& step = steps[p.step];
      if (const auto* repeat = std::get_if<RepeatUntilStep>(&step)) {
        if (evaluate(repeat->predicate, state, actions)) {
          advance(tick);
          continue;
        }
        if (++p.iteration >= repeat->max_iterations) {
          decide(Verdict::Reject, tick);
          return;
        }
        p.step = repeat->loop_to;
        activate(tick);
        continue;
      }
      const auto* world = std::get_if<ExpectWorldStep>(&step);
      if (world && evaluate(world->predicate, state, actions)) {
        advance(tick);
        continue;
      }
      break;
    }
    if (p.verdict == Verdict::Pending && (last_expect == steps.size() || p.step > last_expect)) {
      decide(Verdict::Accept, tick);
    }
    if (p.step >= steps.size()) p.complete = true;
  };
  // Tick at which the episode runs out, if it already has at `tick`.
  auto expiry = [&](std::uint64_t tick) -> std::optional<std::uint64_t> {
    if (p.verdict != Verdict::Pending) return std::nullopt;
    std::optional<std::uint64_t> limit;
    if (instance.deadline) limit = start + instance.deadline;
    if (p.step < steps.size()) {
      std::uint64_t window = 0;
      if (const auto* out = std::get_if<ExpectOutputStep>(&steps[p.step])) window = out->window;
      if (const auto* world = std::get_if<ExpectWorldStep>(&steps[p.step])) window = world->window;
      if (window) limit = std::min(limit.value_or(window + p.activated_at), p.activated_at + window);
    }
    if (limit && tick > *limit) return limit;
    return std::nullopt;
  };

  settle(start);
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (p.verdict == Verdict::Reject || p.complete) break;
    const auto& event = events[i];
    if (auto at = expiry(event.tick)) {
      decide(Verdict::Reject, *at);
      break;
    }
    if (event.kind == EpisodeEvent::Kind::EnvAction) {
      state = event.state;
      actions.push_back(&event);
    }
    if (p.step < steps.size()) {
      const Step& step = steps[p.step];
      bool matched = false;
      switch (event.kind) {
        case EpisodeEvent::Kind::TeacherSaid: matched = std::holds_alternative<SayStep>(step); break;
        case EpisodeEvent::Kind::SkillNamed: matched = std::holds_alternative<NameStep>(step); break;
        case EpisodeEvent::Kind::Reward: matched = std::holds_alternative<RewardStep>(step); break;
        case EpisodeEvent::Kind::LearnerMessage:
          if (const auto* out = std::get_if<ExpectOutputStep>(&step)) {
            matched = std::find(out->routed.begin(), out->routed.end(), event.segments) != out->routed.end();
          }
          break;
        default: break;
      }
      if (matched) advance(event.tick);
    }
    settle(event.tick);
  }
  if (p.verdict == Verdict::Pending && !p.complete) {
    if (auto at = expiry(now)) decide(Verdict::Reject, *at);
  }
  return p;
}

Teacher::Teacher(TaskInstance instance, std::uint64_t start_tick, const World& world)
    : instance_(std::move(instance)) {
  EpisodeEvent start;
  start.kind = EpisodeEvent::Kind::Start;
  start.tick = start_tick;
  start.state = BodyState::of(world);
  events_.push_back(std::move(start));
  progress_ = judge(instance_, events_, start_tick);
}

void Teacher::observe_learner_message(std::uint64_t tick, const Message& message) {
  if (finished_) return;
  EpisodeEvent event;
  event.kind = EpisodeEvent::Kind::LearnerMessage;
  event.tick = tick;
  event.text = message.raw;
  event.segments = route(message);
  for (const auto& segment : event.segments) {
    if (segment.addressee == Agent::Teacher) pending_requests_.push_back(segment.text);
  }
  events_.push_back(std::move(event));
}

void Teacher::observe_env_action(std::uint64_t tick, const EnvCommand& command, const ExecResult& result,
                                 const World& after) {
  if (finished_) return;
  EpisodeEvent event;
  event.kind = EpisodeEvent::Kind::EnvAction;
  event.tick = tick;
  event.command = command;
  event.response = result.response;
  event.effected = result.effected;
  event.state = BodyState::of(after);
  events_.push_back(std::move(event));
}

TeacherOutput Teacher::react(std::uint64_t tick, bool channel_idle, const World& world) {
  TeacherOutput out;
  if (finished_) return out;
  bool idle = channel_idle;

  for (;;) {
    progress_ = judge(instance_, events_, tick);
    if (progress_.verdict == Verdict::Reject) {
      finished_ = true;
      if (instance_.timeout_reward < 0 && !out.reward) out.reward = instance_.timeout_reward;
      return out;
    }
    if (progress_.complete) {
      finished_ = true;
      return out;
    }

    if (idle && !pending_requests_.empty()) {
      const std::string request = std::move(pending_requests_.front());
      pending_requests_.erase(pending_requests_.begin());
      std::optional<std::string> answer;
      try {
        answer = answer_howto(request, instance_, world);
      } catch (const InstructionError&) {
        answer.reset();
      }
      if (answer) {
        out.speech.push_back(*answer);
        EpisodeEvent event;
        event.kind = EpisodeEvent::Kind::HowtoAnswered;
        event.tick = tick;
        event.text = *answer;
        events_.push_back(std::move(event));
        idle = false;
      }
      continue;
    }

    const Step& step = instance_.steps[progress_.step];
    if (const auto* reward = std::get_if<RewardStep>(&step)) {
      if (out.reward) break;  // one reward per tick; the next goes out on the next call
      out.reward = reward->value;
      EpisodeEvent event;
      event.kind = EpisodeEvent::Kind::Reward;
      event.tick = tick;
      event.value = reward->value;
      events_.push_back(std::move(event));
      continue;
    }
    if (const auto* say = std::get_if<SayStep>(&step); say && idle) {
      out.speech.push_back(say->text);
      EpisodeEvent event;
      event.kind = EpisodeEvent::Kind::TeacherSaid;
      event.tick = tick;
      event.text = say->text;
      events_.push_back(std::move(event));
      idle = false;
      continue;
    }
    if (const auto* name = std::get_if<NameStep>(&step); name && idle) {
      out.speech.push_back(name->utterance);
      EpisodeEvent event;
      event.kind = EpisodeEvent::Kind::SkillNamed;
      event.tick = tick;
      event.text = name->label;
      for (const auto& e : events_) {
        if (e.kind == EpisodeEvent::Kind::EnvAction && e.effected) event.skill.push_back(e.command);
      }
      events_.push_back(std::move(event));
      idle = false;
      continue;
    }
    break;
  }
  return out;
}

std::optional<std::string> Teacher::last_utterance() const {
  for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
    if (it->kind == EpisodeEvent::Kind::TeacherSaid || it->kind == EpisodeEvent::Kind::HowtoAnswered) {
      return it->text;
    }
  }
  return std::nullopt;
}

}  // namespace kinder
