#include <cmath>

#include "omk/error.hpp"
#include "omk/metrics.hpp"

namespace omk::metrics {

namespace {

std::vector<std::vector<double>> unit_rows(const Embedding& e, std::size_t& dim) {
  std::vector<std::vector<double>> out;
  out.reserve(e.size());
  for (const auto& v : e) {
    if (dim == 0) {
      dim = v.size();
    } else if (v.size() != dim) {
      throw Error("bertscore: embedding width mismatch");
    }
    double norm = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw Error("bertscore: non-finite embedding value");
      }
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      throw Error("bertscore: zero-norm token embedding");
    }
    auto& u = out.emplace_back(v);
    for (double& x : u) {
      x /= norm;
    }
  }
  return out;
}

// Mean over `from` rows of the best cosine against `to`.
double greedy(const std::vector<std::vector<double>>& from, const std::vector<std::vector<double>>& to) {
  double sum = 0.0;
  for (const auto& a : from) {
    double best = -1.0;
    for (const auto& b : to) {
      double dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
      }
      best = std::max(best, dot);
    }
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

} // namespace

double bertscore_f1(std::string_view hyp, std::string_view ref, const EmbeddingProvider& provider) {
  Embedding h;
  Embedding r;
  try {
    h = provider.embed(hyp);
    r = provider.embed(ref);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string("bertscore: embedding provider failed: ") + e.what());
  }
  if (h.empty() || r.empty()) {
    return 0.0;
  }
  std::size_t dim = 0;
  const auto hu = unit_rows(h, dim);
  const auto ru = unit_rows(r, dim);
  const double precision = greedy(hu, ru);
  const double recall = greedy(ru, hu);
  return precision + recall != 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

} // namespace omk::metrics
