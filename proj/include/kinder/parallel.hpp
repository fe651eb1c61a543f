#pragma once

#include <cstdint>
#include <vector>

#include "kinder/harness.hpp"

namespace kinder {

struct CertifyJob {
  const TaskScript* script = nullptr;
  std::uint64_t seed = 0;
};

/// Every script crossed with seeds [0, seeds).
std::vector<CertifyJob> certify_jobs(const std::vector<TaskScript>& scripts, int seeds);

/// Reference implementation, one job after the other.
std::vector<CertifyResult> certify_serial(const std::vector<CertifyJob>& jobs, const Transform& transform = {});
/// Same results in the same order, spread over OpenMP threads.
std::vector<CertifyResult> certify_parallel(const std::vector<CertifyJob>& jobs, const Transform& transform = {});

/// Independent sessions, one per config; reports come back in input order.
std::vector<SessionReport> run_sessions_serial(const std::vector<RunConfig>& configs);
std::vector<SessionReport> run_sessions_parallel(const std::vector<RunConfig>& configs);

int worker_threads();

}  // namespace kinder
