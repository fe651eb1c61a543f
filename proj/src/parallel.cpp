#include "kinder/parallel.hpp"

#include <exception>

#include <omp.h>

namespace kinder {

std::vector<CertifyJob> certify_jobs(const std::vector<TaskScript>& scripts, int seeds) {
  std::vector<CertifyJob> jobs;
  jobs.reserve(scripts.size() * static_cast<std::size_t>(std::max(seeds, 0)));
  for (const auto& script : scripts) {
    for (int seed = 0; seed < seeds; ++seed) jobs.push_back({&script, static_cast<std::uint64_t>(seed)});
  }
  return jobs;
}

std::vector<CertifyResult> certify_serial(const std::vector<CertifyJob>& jobs, const Transform& transform) {
  std::vector<CertifyResult> results;
  results.reserve(jobs.size());
  for (const auto& job : jobs) results.push_back(certify(*job.script, job.seed, transform));
  return results;
}

std::vector<CertifyResult> certify_parallel(const std::vector<CertifyJob>& jobs, const Transform& transform) {
  std::vector<CertifyResult> results(jobs.size());
  const auto n = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& job = jobs[static_cast<std::size_t>(i)];
    results[static_cast<std::size_t>(i)] = certify(*job.script, job.seed, transform);
  }
  return results;
}

namespace {

SessionReport run_one(const RunConfig& config) {
  auto source = make_source(config);
  auto learner = make_learner(config.learner, config.seed);
  if (!learner) throw HarnessError("unknown learner '" + config.learner + "'");
  return run_session(session_config(config), *source, *learner);
}

}  // namespace

std::vector<SessionReport> run_sessions_serial(const std::vector<RunConfig>& configs) {
  std::vector<SessionReport> reports;
  reports.reserve(configs.size());
  for (const auto& config : configs) reports.push_back(run_one(config));
  return reports;
}

std::vector<SessionReport> run_sessions_parallel(const std::vector<RunConfig>& configs) {
  std::vector<SessionReport> reports(configs.size());
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      reports[static_cast<std::size_t>(i)] = run_one(configs[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return reports;
}

int worker_threads() { return omp_get_max_threads(); }

}  // namespace kinder
