#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace parapde {

template <typename Score>
Support greedy_swap_search(std::size_t n_terms, std::size_t support_size, Score&& score) {
  Support current;
  std::vector<bool> used(n_terms, false);
  double current_score = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < support_size; ++k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = n_terms;
    for (std::size_t j = 0; j < n_terms; ++j) {
      if (used[j]) continue;
      Support trial = current;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), j), j);
      const double s = score(trial);
      if (s < best) {
        best = s;
        best_j = j;
      }
    }
    if (best_j == n_terms) break;
    used[best_j] = true;
    current.insert(std::upper_bound(current.begin(), current.end(), best_j), best_j);
    current_score = best;
  }

  // Best single swap per sweep; when none improves beyond roundoff, try the
  // best double exchange before giving up.
  auto improves = [](double s, double best) { return s < best - 1e-12 * std::abs(best); };
  for (int sweep = 0; sweep < 1000; ++sweep) {
    double best = current_score;
    Support best_support;
    for (std::size_t pos = 0; pos < current.size(); ++pos) {
      for (std::size_t j = 0; j < n_terms; ++j) {
        if (used[j]) continue;
        Support trial = current;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(pos));
        trial.insert(std::upper_bound(trial.begin(), trial.end(), j), j);
        const double s = score(trial);
        if (improves(s, best)) {
          best = s;
          best_support = std::move(trial);
        }
      }
    }
    if (best_support.empty()) {
      for (std::size_t p1 = 0; p1 < current.size(); ++p1) {
        for (std::size_t p2 = p1 + 1; p2 < current.size(); ++p2) {
          for (std::size_t j1 = 0; j1 < n_terms; ++j1) {
            if (used[j1]) continue;
            for (std::size_t j2 = j1 + 1; j2 < n_terms; ++j2) {
              if (used[j2]) continue;
              Support trial;
              for (std::size_t q = 0; q < current.size(); ++q)
                if (q != p1 && q != p2) trial.push_back(current[q]);
              trial.push_back(j1);
              trial.push_back(j2);
              std::sort(trial.begin(), trial.end());
              const double s = score(trial);
              if (improves(s, best)) {
                best = s;
                best_support = std::move(trial);
              }
            }
          }
        }
      }
    }
    if (best_support.empty()) break;
    for (std::size_t j : current) used[j] = false;
    for (std::size_t j : best_support) used[j] = true;
    current = std::move(best_support);
    current_score = best;
  }
  return current;
}

}  // namespace parapde
