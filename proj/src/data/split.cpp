#include "vitask/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "vitask/numerics/random.hpp"

namespace vitask::data {

namespace {

constexpr std::uint64_t kSplitStream = 0x53504c54;

/// Largest-remainder apportionment of `total` units by `weights`.
std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> out{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double ideal = static_cast<double>(total) * ratios[s];
    out[s] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
    frac[s] = ideal - static_cast<double>(out[s]);
    used += out[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < total; i = (i + 1) % 3) {
    if (ratios[order[i]] > 0.0) {
      ++out[order[i]];
      ++used;
    }
  }
  return out;
}

}  // namespace

DatasetSplit split_dataset(const std::vector<ClassificationSample>& samples, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  double total_ratio = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("split ratios must be non-negative");
    total_ratio += r;
  }
  if (std::abs(total_ratio - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");

  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < samples.size(); ++i) by_label[samples[i].label].push_back(i);
  for (const auto& [label, members] : by_label) {
    if (members.size() < 3) {
      throw std::invalid_argument("cannot stratify: class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " samples");
    }
  }

  const auto targets = apportion(samples.size(), ratios);
  const std::size_t n_classes = by_label.size();
  std::vector<std::array<std::size_t, 3>> counts(n_classes);
  std::vector<std::array<double, 3>> frac(n_classes);
  std::vector<std::size_t> spare(n_classes, 0);
  std::array<std::ptrdiff_t, 3> deficit{};
  for (std::size_t s = 0; s < 3; ++s) deficit[s] = static_cast<std::ptrdiff_t>(targets[s]);

  std::size_t ci = 0;
  for (const auto& [label, members] : by_label) {
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double ideal = static_cast<double>(members.size()) * ratios[s];
      counts[ci][s] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
      frac[ci][s] = ratios[s] > 0.0 ? ideal - static_cast<double>(counts[ci][s]) : -1.0;
      used += counts[ci][s];
      deficit[s] -= static_cast<std::ptrdiff_t>(counts[ci][s]);
    }
    spare[ci] = members.size() - used;
    ++ci;
  }

  // Hand out the leftover units, largest fractional part first, one per
  // (class, split) cell, while the split still has room.
  struct Cell {
    std::size_t c, s;
    double frac;
  };
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t s = 0; s < 3; ++s)
      if (frac[c][s] >= 0.0) cells.push_back({c, s, frac[c][s]});
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.frac > b.frac; });
  for (const Cell& cell : cells) {
    if (spare[cell.c] > 0 && deficit[cell.s] > 0) {
      ++counts[cell.c][cell.s];
      --spare[cell.c];
      --deficit[cell.s];
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < 3 && spare[c] > 0; ++s) {
      while (spare[c] > 0 && deficit[s] > 0) {
        ++counts[c][s];
        --spare[c];
        --deficit[s];
      }
    }
  }

  auto rng = numerics::make_rng(seed, kSplitStream);
  std::array<std::vector<std::size_t>, 3> picked;
  ci = 0;
  for (const auto& [label, members] : by_label) {
    std::vector<std::size_t> shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      picked[s].insert(picked[s].end(), shuffled.begin() + static_cast<std::ptrdiff_t>(offset),
                       shuffled.begin() + static_cast<std::ptrdiff_t>(offset + counts[ci][s]));
      offset += counts[ci][s];
    }
    ++ci;
  }

  DatasetSplit out;
  std::array<std::vector<ClassificationSample>*, 3> dst{&out.train, &out.val, &out.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(picked[s].begin(), picked[s].end());
    for (std::size_t i : picked[s]) dst[s]->push_back(samples[i]);
  }
  return out;
}

}  // namespace vitask::data
