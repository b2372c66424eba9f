#include "gowu/uncertainty.hpp"

#include <cmath>

namespace gowu {

double CountEstimator::score(const Observation& obs) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = counts_.find(obs.hash);
  uint64_t n = (it == counts_.end()) ? 0 : it->second;
  return 1.0 / std::sqrt(1.0 + static_cast<double>(n));
}

void CountEstimator::update(std::span<const Observation> batch) {
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& obs : batch) counts_[obs.hash] += 1;
}

uint64_t CountEstimator::distinct_buckets() const {
  std::lock_guard<std::mutex> lock(mu_);
  return counts_.size();
}

// ---------------------------------------------------------------------------

SimHashEstimator::SimHashEstimator(uint64_t projection_seed, int bits)
    : projection_seed_(projection_seed), bits_(bits) {
  if (bits < 1 || bits > 64)
    throw ConfigError("simhash estimator: bits must be in [1, 64]");
  sign_table_.resize(bits);
}

int8_t SimHashEstimator::projection_sign(int bit, size_t pos) const {
  auto& row = sign_table_[bit];
  while (row.size() <= pos) {
    uint64_t h = derive_stream({projection_seed_, static_cast<uint64_t>(bit),
                                static_cast<uint64_t>(row.size())});
    row.push_back((h & 1) ? int8_t{1} : int8_t{-1});
  }
  return row[pos];
}

uint64_t SimHashEstimator::bucket(const Observation& obs) const {
  std::lock_guard<std::mutex> lock(table_mu_);
  uint64_t b = 0;
  for (int bit = 0; bit < bits_; ++bit) {
    int64_t acc = 0;
    for (size_t j = 0; j < obs.bytes.size(); ++j)
      acc += static_cast<int64_t>(projection_sign(bit, j)) * obs.bytes[j];
    if (acc > 0) b |= (1ull << bit);
  }
  // Observations of different lengths must not collide on projection alone.
  return derive_stream({b, static_cast<uint64_t>(obs.bytes.size())});
}

double SimHashEstimator::score(const Observation& obs) const {
  uint64_t b = bucket(obs);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = counts_.find(b);
  uint64_t n = (it == counts_.end()) ? 0 : it->second;
  return 1.0 / std::sqrt(1.0 + static_cast<double>(n));
}

void SimHashEstimator::update(std::span<const Observation> batch) {
  for (const auto& obs : batch) {
    uint64_t b = bucket(obs);
    std::lock_guard<std::mutex> lock(mu_);
    counts_[b] += 1;
  }
}

uint64_t SimHashEstimator::distinct_buckets() const {
  std::lock_guard<std::mutex> lock(mu_);
  return counts_.size();
}

std::unique_ptr<UncertaintyEstimator> make_estimator(const EstimatorConfig& cfg) {
  switch (cfg.kind) {
    case EstimatorKind::Count:
      return std::make_unique<CountEstimator>();
    case EstimatorKind::SimHash:
      return std::make_unique<SimHashEstimator>(cfg.projection_seed, cfg.bits);
  }
  throw ConfigError("estimator: unknown kind");
}

}  // namespace gowu
