#ifndef TGN_TESTS_TEST_UTIL_H_
#define TGN_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tgn/event_log.h"
#include "tgn/ops.h"
#include "tgn/tensor.h"

namespace tgn::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Scalar> v(static_cast<std::size_t>(shape.numel()));
  for (auto& x : v) x = static_cast<Scalar>(u(rng));
  return Tensor::from_values(shape, std::move(v), requires_grad);
}

inline Event interaction(NodeId s, NodeId d, double t,
                         std::vector<Scalar> features = {}) {
  Event e;
  e.kind = EventKind::kInteraction;
  e.source = s;
  e.target = d;
  e.timestamp = t;
  e.features = std::move(features);
  return e;
}

// Random unipartite interaction log with integer-ish timestamps (ties
// allowed) and random edge features.
inline EventLog random_log(std::int64_t events, std::int64_t nodes,
                           std::int64_t edge_dim, Rng& rng,
                           double tie_probability = 0.3) {
  EventLog log(edge_dim, 0);
  std::uniform_int_distribution<NodeId> node(0, nodes - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double t = 1.0;
  for (std::int64_t i = 0; i < events; ++i) {
    if (i > 0 && u(rng) > tie_probability) t += 1.0 + std::floor(u(rng) * 3.0);
    NodeId s = node(rng);
    NodeId d = node(rng);
    while (d == s) d = node(rng);
    std::vector<Scalar> f(static_cast<std::size_t>(edge_dim));
    for (auto& x : f) x = static_cast<Scalar>(u(rng) * 2.0 - 1.0);
    log.append(interaction(s, d, t, std::move(f)));
  }
  log.reserve_nodes(nodes);
  return log;
}

inline double max_abs_diff(std::span<const Scalar> a, std::span<const Scalar> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace tgn::testing

#endif  // TGN_TESTS_TEST_UTIL_H_
