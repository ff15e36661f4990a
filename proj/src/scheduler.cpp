#include "parclust/scheduler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "parclust/bounded_queue.hpp"

namespace parclust {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct TaskResult {
  std::size_t task_index;
  TopPBuffer buffer;
};

// First failure wins; everyone else just stops.
class AbortState {
 public:
  bool raised() const noexcept { return raised_.load(std::memory_order_acquire); }

  void raise(BlockTask task, std::string what) {
    std::lock_guard lock(mu_);
    if (!failure_) failure_.emplace(task, std::move(what));
    raised_.store(true, std::memory_order_release);
  }

  void rethrow() const {
    if (failure_) throw RoundFailure(failure_->first, failure_->second);
  }

 private:
  std::atomic<bool> raised_{false};
  std::mutex mu_;
  std::optional<std::pair<BlockTask, std::string>> failure_;
};

}  // namespace

PipelineConfig PipelineConfig::resolved(std::size_t thread_cap) const {
  PipelineConfig c = *this;
  if (c.managers == 0) c.managers = 1;
  if (c.workers_per_manager == 0) {
    std::size_t hw = std::max<unsigned>(1, std::thread::hardware_concurrency());
    if (thread_cap) hw = std::min(hw, thread_cap);
    c.workers_per_manager = std::max<std::size_t>(1, hw / c.managers);
  }
  if (thread_cap && c.managers * c.workers_per_manager > thread_cap) {
    c.managers = std::min(c.managers, thread_cap);
    c.workers_per_manager = std::max<std::size_t>(1, thread_cap / c.managers);
  }
  c.input_buffers = std::max(c.input_buffers, c.managers);
  return c;
}

void PipelineConfig::validate() const {
  if (managers == 0 || workers_per_manager == 0 || input_buffers == 0 ||
      output_buffers == 0 || buffers_per_worker == 0)
    throw InvalidInput("pipeline counts must all be at least 1");
  if (input_buffers < managers)
    throw InvalidInput("input-buffers must be at least the number of managers");
}

void UtilizationStats::accumulate(const UtilizationStats& other) {
  if (workers.empty()) {
    workers.resize(other.workers.size());
    manager_reduce_s.resize(other.manager_reduce_s.size());
    workers_per_manager = other.workers_per_manager;
  }
  if (workers.size() != other.workers.size() ||
      manager_reduce_s.size() != other.manager_reduce_s.size())
    throw std::logic_error("accumulating stats of different pipeline shapes");
  for (std::size_t k = 0; k < workers.size(); ++k) {
    workers[k].busy_s += other.workers[k].busy_s;
    workers[k].idle_s += other.workers[k].idle_s;
    workers[k].lifetime_s += other.workers[k].lifetime_s;
    workers[k].tasks += other.workers[k].tasks;
  }
  for (std::size_t k = 0; k < manager_reduce_s.size(); ++k)
    manager_reduce_s[k] += other.manager_reduce_s[k];
  tasks += other.tasks;
  rounds += other.rounds;
  cache_served += other.cache_served;
  rescans += other.rescans;
  wall_s += other.wall_s;
  peak_inflight_results = std::max(peak_inflight_results, other.peak_inflight_results);
}

double UtilizationStats::aggregate_utilization() const noexcept {
  double busy = 0.0, total = 0.0;
  for (const auto& w : workers) {
    busy += w.busy_s;
    total += w.busy_s + w.idle_s;
  }
  return total > 0.0 ? 100.0 * busy / total : 0.0;
}

std::string report_utilization(const UtilizationStats& stats) {
  std::ostringstream out;
  char line[160];
  const std::size_t wpm = std::max<std::size_t>(1, stats.workers_per_manager);
  for (std::size_t k = 0; k < stats.workers.size(); ++k) {
    const auto& w = stats.workers[k];
    const double total = w.busy_s + w.idle_s;
    const double pct = total > 0.0 ? 100.0 * w.busy_s / total : 0.0;
    std::snprintf(line, sizeof line,
                  "worker %zu.%zu: busy %.3f s, idle %.3f s, tasks %zu, utilization %.1f%%\n",
                  k / wpm, k % wpm, w.busy_s, w.idle_s, w.tasks, pct);
    out << line;
  }
  std::snprintf(line, sizeof line, "aggregate: %zu tasks, wall %.3f s, utilization %.1f%%\n",
                stats.tasks, stats.wall_s, stats.aggregate_utilization());
  out << line;
  return out.str();
}

RoundFailure::RoundFailure(BlockTask t, const std::string& what)
    : std::runtime_error("scan task for block pair (" + std::to_string(t.i) + ", " +
                         std::to_string(t.j) + ") failed: " + what),
      task(t) {}

RoundOutput run_round(const Dataset& data, const EligibilitySnapshot& snapshot,
                      const BlockPlan& plan, std::size_t P, const PipelineConfig& config) {
  return run_round(plan, P, config, [&](std::size_t k) {
    return scan_block_pair(data, snapshot, plan, plan.tasks[k], P);
  });
}

RoundOutput run_round(const BlockPlan& plan, std::size_t P, const PipelineConfig& config,
                      const ScanFn& scan) {
  std::vector<std::size_t> all(plan.tasks.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return run_tasks(plan, all, P, config, scan);
}

RoundOutput run_tasks(const BlockPlan& plan, std::span<const std::size_t> tasks, std::size_t P,
                      const PipelineConfig& config, const ScanFn& scan) {
  config.validate();
  const auto t0 = Clock::now();
  const std::size_t M = config.managers;
  const std::size_t W = config.workers_per_manager;
  const std::size_t slots = W * config.buffers_per_worker;

  BoundedQueue<std::size_t> input(config.input_buffers);
  BoundedQueue<TopPBuffer> output(config.output_buffers);
  std::vector<std::unique_ptr<BoundedQueue<std::size_t>>> prepared;
  std::vector<std::unique_ptr<BoundedQueue<TaskResult>>> results;
  for (std::size_t m = 0; m < M; ++m) {
    prepared.push_back(std::make_unique<BoundedQueue<std::size_t>>(slots));
    results.push_back(std::make_unique<BoundedQueue<TaskResult>>(slots));
  }

  AbortState abort;
  auto close_all = [&] {
    input.close();
    output.close();
    for (auto& q : prepared) q->close();
    for (auto& q : results) q->close();
  };

  RoundOutput out;
  out.stats.workers.resize(M * W);
  out.stats.manager_reduce_s.assign(M, 0.0);
  out.stats.workers_per_manager = W;
  out.stats.rounds = 1;
  std::mutex executed_mu;
  std::atomic<std::size_t> inflight{0};
  std::atomic<std::size_t> peak{0};

  auto worker_body = [&](std::size_t m, std::size_t w) {
    WorkerStats& ws = out.stats.workers[m * W + w];
    const auto born = Clock::now();
    for (;;) {
      const auto wait0 = Clock::now();
      auto task = prepared[m]->pop();
      ws.idle_s += seconds_since(wait0);
      if (!task || abort.raised()) break;
      const auto busy0 = Clock::now();
      try {
        TopPBuffer buf = scan(*task);
        ws.busy_s += seconds_since(busy0);
        ++ws.tasks;
        {
          std::lock_guard lock(executed_mu);
          out.executed.push_back(*task);
        }
        std::size_t now = inflight.fetch_add(1) + 1;
        std::size_t seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        if (!results[m]->push({*task, std::move(buf)})) break;
      } catch (const std::exception& e) {
        abort.raise(plan.tasks[*task], e.what());
        close_all();
        break;
      } catch (...) {
        abort.raise(plan.tasks[*task], "unknown exception");
        close_all();
        break;
      }
    }
    ws.lifetime_s = seconds_since(born);
  };

  // Second-level manager: keeps at most `slots` tasks outstanding with its
  // workers and folds their buffers into a running top-P as they arrive.
  auto manager_body = [&](std::size_t m) {
    TopPBuffer acc(P);
    std::size_t outstanding = 0;
    bool input_done = false;
    double& reduce_s = out.stats.manager_reduce_s[m];
    while (!abort.raised()) {
      while (!input_done && outstanding < slots) {
        auto task = outstanding == 0 ? input.pop() : input.try_pop();
        if (!task) {
          if (outstanding == 0 || input.drained()) input_done = input.drained() || abort.raised();
          break;
        }
        if (!prepared[m]->push(*task)) break;
        ++outstanding;
      }
      if (abort.raised()) break;
      if (outstanding == 0) {
        if (input_done) break;
        continue;
      }
      auto res = results[m]->pop();
      if (!res) break;
      --outstanding;
      const auto r0 = Clock::now();
      acc = reduce_topp(acc, res->buffer, P);
      inflight.fetch_sub(1);
      reduce_s += seconds_since(r0);
    }
    prepared[m]->close();
    if (!abort.raised()) output.push(std::move(acc));
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(M * (W + 1));
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t w = 0; w < W; ++w) threads.emplace_back(worker_body, m, w);
      threads.emplace_back(manager_body, m);
    }

    // First-level manager: feed tasks in plan order, then reduce the
    // managers' results in whatever order they come back.
    for (std::size_t k : tasks)
      if (!input.push(k)) break;
    input.close();
    TopPBuffer acc(P);
    for (std::size_t m = 0; m < M; ++m) {
      auto part = output.pop();
      if (!part) break;
      acc = reduce_topp(acc, *part, P);
    }
    out.buffer = std::move(acc);
    if (abort.raised()) close_all();
  }
  abort.rethrow();

  out.stats.tasks = out.executed.size();
  out.stats.rescans = out.executed.size();
  out.stats.peak_inflight_results = peak.load();
  out.stats.wall_s = seconds_since(t0);
  return out;
}

PairCache::PairCache(const BlockPlan& plan, std::size_t depth)
    : depth_(depth), entries_(plan.tasks.size()) {}

std::size_t PairCache::depth_for(const BlockPlan& plan, std::size_t P,
                                 std::size_t budget_bytes) {
  const std::size_t per_pair = sizeof(CandidatePair) * std::max<std::size_t>(1, plan.tasks.size());
  const std::size_t fits = budget_bytes / per_pair;
  if (fits < P) return 0;
  return std::min(fits, 4 * P);
}

std::size_t PairCache::stored_pairs() const noexcept {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.pairs.size();
  return total;
}

TopPBuffer PairCache::serve(std::size_t task, const EligibilitySnapshot& s, std::size_t P) {
  Entry& e = entries_.at(task);
  if (!e.filled) {
    e.served = 0;
    return TopPBuffer(P);
  }
  std::erase_if(e.pairs, [&](const CandidatePair& c) { return !pair_eligible(s, c.a, c.b, c.dist); });
  e.served = e.pairs.size();
  const std::size_t take = std::min(P, e.pairs.size());
  return TopPBuffer(P, std::vector<CandidatePair>(e.pairs.begin(), e.pairs.begin() + take));
}

bool PairCache::needs_rescan(std::size_t task, const TopPBuffer& provisional, std::size_t P) const {
  const Entry& e = entries_.at(task);
  if (!e.filled) return true;
  if (e.complete || e.served >= P) return false;
  // Unknown pairs all sort after the horizon; they matter only if the
  // provisional result still has room for them.
  return !provisional.full() || key_less(e.horizon, provisional.back());
}

TopPBuffer PairCache::refill(std::size_t task, const Dataset& data, const EligibilitySnapshot& s,
                             const BlockPlan& plan, std::size_t P) {
  Entry& e = entries_.at(task);
  const std::size_t depth = std::max(depth_, P);
  TopPBuffer scanned = scan_block_pair(data, s, plan, plan.tasks.at(task), depth);
  e.pairs = scanned.pairs();
  e.pairs.shrink_to_fit();
  e.filled = true;
  e.complete = e.pairs.size() < depth;
  if (!e.pairs.empty()) e.horizon = e.pairs.back();
  e.served = e.pairs.size();
  const std::size_t take = std::min(P, e.pairs.size());
  return TopPBuffer(P, std::vector<CandidatePair>(e.pairs.begin(), e.pairs.begin() + take));
}

RoundOutput run_cached_round(const Dataset& data, const EligibilitySnapshot& snapshot,
                             const BlockPlan& plan, std::size_t P, const PipelineConfig& config,
                             PairCache& cache) {
  RoundOutput served = run_round(plan, P, config, [&](std::size_t k) {
    return cache.serve(k, snapshot, P);
  });
  std::vector<std::size_t> rescan;
  for (std::size_t k = 0; k < plan.tasks.size(); ++k)
    if (cache.needs_rescan(k, served.buffer, P)) rescan.push_back(k);

  RoundOutput out;
  out.executed = std::move(served.executed);
  out.stats = served.stats;
  out.stats.rescans = 0;
  out.stats.cache_served = plan.tasks.size() - rescan.size();
  out.buffer = std::move(served.buffer);
  if (!rescan.empty()) {
    RoundOutput scanned = run_tasks(plan, rescan, P, config, [&](std::size_t k) {
      return cache.refill(k, data, snapshot, plan, P);
    });
    // A rescanned task's served pairs reappear in its refill; the reduction
    // keeps one copy of each key.
    out.buffer = reduce_topp(out.buffer, scanned.buffer, P);
    scanned.stats.rounds = 0;
    scanned.stats.cache_served = 0;
    out.stats.accumulate(scanned.stats);
  }
  return out;
}

}  // namespace parclust
