#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "gowu/common.hpp"

namespace gowu {

enum class EstimatorKind : uint8_t { Count = 0, SimHash = 1 };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Count;
  uint64_t projection_seed = 1;  // SimHash only
  int bits = 32;                 // SimHash only, in [1, 64]
};

// Shared novelty signal. Scores lie in (0, 1]; a never-seen observation
// scores 1.0 and repeated visits push the score down monotonically. Updates
// are commutative counter increments, so concurrent writers and batch
// ordering cannot change the resulting table.
class UncertaintyEstimator {
 public:
  virtual ~UncertaintyEstimator() = default;
  virtual EstimatorKind kind() const = 0;
  virtual double score(const Observation& obs) const = 0;
  virtual void update(std::span<const Observation> batch) = 0;
  virtual uint64_t distinct_buckets() const = 0;
};

// Visitation counting keyed directly on observation hashes:
// score = (1 + n)^(-1/2).
class CountEstimator final : public UncertaintyEstimator {
 public:
  EstimatorKind kind() const override { return EstimatorKind::Count; }
  double score(const Observation& obs) const override;
  void update(std::span<const Observation> batch) override;
  uint64_t distinct_buckets() const override;

 private:
  mutable std::mutex mu_;
  std::unordered_map<uint64_t, uint64_t> counts_;
};

// Counting over locality-sensitive buckets: each of `bits` signed random
// projections of the observation bytes contributes one bucket bit, so nearby
// byte patterns tend to share a counter.
class SimHashEstimator final : public UncertaintyEstimator {
 public:
  explicit SimHashEstimator(uint64_t projection_seed, int bits);
  EstimatorKind kind() const override { return EstimatorKind::SimHash; }
  double score(const Observation& obs) const override;
  void update(std::span<const Observation> batch) override;
  uint64_t distinct_buckets() const override;

  uint64_t bucket(const Observation& obs) const;

 private:
  int8_t projection_sign(int bit, size_t pos) const;

  uint64_t projection_seed_;
  int bits_;
  mutable std::mutex mu_;        // guards counts_
  std::unordered_map<uint64_t, uint64_t> counts_;
  // Sign table grown lazily to the longest observation seen; sign_table_[bit]
  // holds one +1/-1 entry per byte position. Guarded separately so bucket
  // computation does not hold the counter lock.
  mutable std::mutex table_mu_;
  mutable std::vector<std::vector<int8_t>> sign_table_;
};

std::unique_ptr<UncertaintyEstimator> make_estimator(const EstimatorConfig& cfg);

}  // namespace gowu
