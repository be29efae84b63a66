#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "fedres/data.hpp"
#include "fedres/rng.hpp"

namespace fedres {

struct LabeledExample {
  int label = 0;
  Vector features;
  std::size_t line = 0;  // 1-based line in the source text

  bool operator==(const LabeledExample&) const = default;
};

/// Dense multiclass corpus. `dim` is the largest feature index seen.
struct MulticlassCorpus {
  std::vector<LabeledExample> samples;
  std::size_t dim = 0;

  std::vector<int> classes() const {
    std::set<int> s;
    for (const auto& e : samples) s.insert(e.label);
    return {s.begin(), s.end()};
  }
  std::size_t num_classes() const { return classes().size(); }

  bool operator==(const MulticlassCorpus&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool parse_double(std::string_view tok, double& out) {
  // from_chars for double is unavailable on some toolchains; strtod on a copy
  if (tok.empty()) return false;
  std::string buf(tok);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses "label index:value ..." lines with 1-based indices. Blank lines and
/// '#' comments are skipped; line numbers always refer to the raw text.
inline MulticlassCorpus parse_libsvm(std::string_view text) {
  struct Sparse {
    int label;
    std::vector<std::pair<std::size_t, double>> entries;
    std::size_t line;
  };
  std::vector<Sparse> rows;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    std::vector<std::string_view> toks;
    std::size_t p = 0;
    while (p < line.size()) {
      const std::size_t b = line.find_first_not_of(" \t", p);
      if (b == std::string_view::npos) break;
      const std::size_t e = line.find_first_of(" \t", b);
      toks.push_back(line.substr(b, e == std::string_view::npos ? line.size() - b : e - b));
      p = e == std::string_view::npos ? line.size() : e;
    }

    double label_value = 0.0;
    if (!detail::parse_double(toks[0], label_value) || label_value != std::floor(label_value) ||
        std::fabs(label_value) > 1e9) {
      throw ParseError(line_no, "label '" + std::string(toks[0]) + "' is not an integer");
    }
    Sparse row{static_cast<int>(label_value), {}, line_no};
    std::set<std::size_t> seen;
    for (std::size_t k = 1; k < toks.size(); ++k) {
      const auto tok = toks[k];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError(line_no, "malformed token '" + std::string(tok) + "'");
      }
      long long index = 0;
      const auto idx_str = tok.substr(0, colon);
      const auto [ptr, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), index);
      if (ec != std::errc() || ptr != idx_str.data() + idx_str.size()) {
        throw ParseError(line_no, "malformed index in '" + std::string(tok) + "'");
      }
      if (index <= 0) throw ParseError(line_no, "feature index must be >= 1, got " + std::to_string(index));
      double value = 0.0;
      if (!detail::parse_double(tok.substr(colon + 1), value)) {
        throw ParseError(line_no, "malformed value in '" + std::string(tok) + "'");
      }
      const auto idx = static_cast<std::size_t>(index);
      if (!seen.insert(idx).second) {
        throw ParseError(line_no, "duplicate feature index " + std::to_string(idx));
      }
      dim = std::max(dim, idx);
      row.entries.emplace_back(idx, value);
    }
    rows.push_back(std::move(row));
  }

  MulticlassCorpus corpus;
  corpus.dim = dim;
  corpus.samples.reserve(rows.size());
  for (auto& r : rows) {
    Vector x(dim, 0.0);
    for (auto [idx, v] : r.entries) x[idx - 1] = v;
    corpus.samples.push_back(LabeledExample{r.label, std::move(x), r.line});
  }
  return corpus;
}

/// Writes nonzero entries with round-trip precision. The first line also
/// carries the last coordinate so the corpus dimension survives a re-parse.
/// Line numbers are not preserved; re-parsing numbers lines consecutively.
inline std::string serialize_libsvm(const MulticlassCorpus& corpus) {
  std::string out;
  char buf[64];
  for (std::size_t n = 0; n < corpus.samples.size(); ++n) {
    const auto& e = corpus.samples[n];
    out += std::to_string(e.label);
    for (std::size_t k = 0; k < e.features.size(); ++k) {
      const bool last = k + 1 == corpus.dim;
      if (e.features[k] != 0.0 || (n == 0 && last)) {
        std::snprintf(buf, sizeof buf, " %zu:%.17g", k + 1, e.features[k]);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

/// Splits a multiclass corpus into P binary client tasks.
///
/// A random floor(0.3 K) of the classes is merged into C0 (label +1). Its
/// samples are dealt out M per client; the remaining classes are cut into
/// single-class buckets of M and each client draws one bucket (label -1).
/// floor(holdout * M) of each label go to the client's test set, so the
/// training set has exactly N = M - floor(holdout * M) <= N0 per label.
inline FederatedDataset partition_federated(const MulticlassCorpus& corpus, std::size_t clients,
                                            std::size_t n0, std::uint64_t seed, double holdout = 0.25) {
  if (clients < 1) throw ConfigError("partition: need at least one client");
  if (n0 < 1) throw ConfigError("partition: N0 must be >= 1");
  if (!(holdout >= 0.0 && holdout < 1.0)) throw ConfigError("partition: holdout must be in [0, 1)");
  const auto classes = corpus.classes();
  const std::size_t k = classes.size();
  if (k < 6) throw ConfigError("partition: corpus needs at least 6 classes, has " + std::to_string(k));

  auto gen = substream(seed, "partition");
  std::vector<int> shuffled = classes;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const auto merged_count = static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(k)));
  std::set<int> merged(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(merged_count));
  if (merged.size() >= k) throw ConfigError("partition: no class left outside the merged set");

  std::vector<std::size_t> positives;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t n = 0; n < corpus.samples.size(); ++n) {
    const int c = corpus.samples[n].label;
    if (merged.count(c)) {
      positives.push_back(n);
    } else {
      by_class[c].push_back(n);
    }
  }
  std::shuffle(positives.begin(), positives.end(), gen);

  auto held = [&](std::size_t m) { return static_cast<std::size_t>(std::floor(holdout * static_cast<double>(m))); };
  std::size_t m_cap = n0;
  while (m_cap + 1 - held(m_cap + 1) <= n0) ++m_cap;
  const std::size_t m = std::min(m_cap, positives.size() / clients);
  if (m < 1 || m - held(m) < 1) {
    throw ConfigError("partition: too few merged-class samples for " + std::to_string(clients) + " clients");
  }

  struct Bucket {
    int label;
    std::vector<std::size_t> members;
  };
  std::vector<Bucket> buckets;
  for (auto& [c, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), gen);
    for (std::size_t b = 0; b + m <= idx.size(); b += m) {
      buckets.push_back(Bucket{c, std::vector<std::size_t>(idx.begin() + std::ptrdiff_t(b),
                                                           idx.begin() + std::ptrdiff_t(b + m))});
    }
  }
  if (buckets.size() < clients) {
    throw ConfigError("partition: only " + std::to_string(buckets.size()) + " single-class buckets of size " +
                      std::to_string(m) + " for " + std::to_string(clients) + " clients");
  }
  std::shuffle(buckets.begin(), buckets.end(), gen);

  FederatedDataset out;
  auto fgen = substream(seed, "features");
  std::vector<std::size_t> perm(corpus.dim);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), fgen);
  const std::size_t n_global = (corpus.dim + 1) / 2;
  out.global_features.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_global));
  out.local_features.assign(perm.begin() + std::ptrdiff_t(n_global), perm.end());
  std::sort(out.global_features.begin(), out.global_features.end());
  std::sort(out.local_features.begin(), out.local_features.end());
  out.global_dim = out.global_features.size();
  out.merged_classes.assign(merged.begin(), merged.end());
  out.per_label = m - held(m);

  auto make = [&](std::size_t n, double y) {
    const auto& x = corpus.samples[n].features;
    Sample s;
    s.x_global.reserve(out.global_features.size());
    for (auto f : out.global_features) s.x_global.push_back(x[f]);
    for (auto f : out.local_features) s.x_local.push_back(x[f]);
    s.y = y;
    return s;
  };

  const std::size_t h = held(m);
  for (std::size_t i = 0; i < clients; ++i) {
    std::vector<std::pair<std::size_t, double>> train_idx;
    std::vector<std::pair<std::size_t, double>> test_idx;
    const std::vector<std::size_t> pos(positives.begin() + std::ptrdiff_t(i * m),
                                       positives.begin() + std::ptrdiff_t((i + 1) * m));
    const auto& neg = buckets[i].members;
    for (std::size_t r = 0; r < m; ++r) {
      (r < h ? test_idx : train_idx).emplace_back(pos[r], 1.0);
      (r < h ? test_idx : train_idx).emplace_back(neg[r], -1.0);
    }
    auto cgen = substream(seed, "client-order", i);
    std::shuffle(train_idx.begin(), train_idx.end(), cgen);

    std::vector<Sample> train, test;
    std::vector<std::size_t> train_lines, test_lines;
    for (auto [n, y] : train_idx) {
      train.push_back(make(n, y));
      train_lines.push_back(corpus.samples[n].line);
    }
    for (auto [n, y] : test_idx) {
      test.push_back(make(n, y));
      test_lines.push_back(corpus.samples[n].line);
    }
    out.train.push_back(std::move(train));
    out.test.push_back(std::move(test));
    out.train_lines.push_back(std::move(train_lines));
    out.test_lines.push_back(std::move(test_lines));
    out.local_dims.push_back(out.local_features.size());
    out.tasks.push_back(ClientTask{buckets[i].label});
  }
  return out;
}

/// Audit manifest: one "client_id,sample_line_number,role" row per sample.
inline void write_partition_manifest(std::ostream& os, const FederatedDataset& data) {
  os << "client_id,sample_line_number,role\n";
  for (std::size_t i = 0; i < data.clients(); ++i) {
    for (auto line : data.train_lines.at(i)) os << i << ',' << line << ",train\n";
    for (auto line : data.test_lines.at(i)) os << i << ',' << line << ",test\n";
  }
}

/// Labels y = u_g . x + u_i . x (+ noise), u_i = v for the first half of the
/// clients and -v for the rest; global and local blocks are the same x.
inline FederatedDataset gen_example2(std::size_t clients, const Vector& v, double noise, Round rounds,
                                     std::uint64_t seed, Vector u_global = {}, std::size_t test_size = 200) {
  if (clients == 0 || clients % 2 != 0) throw ConfigError("example2: number of clients must be even");
  if (rounds < 1) throw ConfigError("example2: rounds must be >= 1");
  if (v.empty()) throw ConfigError("example2: v must be non-empty");
  const std::size_t d = v.size();
  if (u_global.empty()) u_global.assign(d, 0.0);
  require_same_dim(u_global.size(), d, "example2 u_global");
  if (noise < 0.0) throw ConfigError("example2: noise must be nonnegative");

  FederatedDataset out;
  out.global_dim = d;
  out.local_dims.assign(clients, d);
  for (std::size_t i = 0; i < clients; ++i) {
    const Vector u = i < clients / 2 ? v : scaled(v, -1.0);
    auto gen = substream(seed, "example2", i);
    std::normal_distribution<double> z(0.0, 1.0);
    auto draw = [&] {
      Sample s;
      s.x_global.resize(d);
      for (auto& x : s.x_global) x = z(gen);
      s.x_local = s.x_global;
      s.y = dot(u_global, s.x_global) + dot(u, s.x_global);
      if (noise > 0.0) s.y += noise * z(gen);
      return s;
    };
    std::vector<Sample> train, test;
    for (Round t = 0; t < rounds; ++t) train.push_back(draw());
    for (std::size_t t = 0; t < test_size; ++t) test.push_back(draw());
    out.train.push_back(std::move(train));
    out.test.push_back(std::move(test));
  }
  return out;
}

/// Single-client stream: a, b ~ N(0,1), eps ~ N(0, 0.25),
/// x_g = [a + eps, b], x_l = [1 - a, 1 - b], y = 1.
inline FederatedDataset gen_appendix_c(Round rounds, std::uint64_t seed) {
  if (rounds < 1) throw ConfigError("gen_appendix_c: rounds must be >= 1");
  FederatedDataset out;
  out.global_dim = 2;
  out.local_dims = {2};
  auto gen = substream(seed, "appendix-c");
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> eps(0.0, 0.5);
  std::vector<Sample> stream;
  stream.reserve(static_cast<std::size_t>(rounds));
  for (Round t = 0; t < rounds; ++t) {
    const double a = unit(gen);
    const double b = unit(gen);
    const double e = eps(gen);
    stream.push_back(Sample{{a + e, b}, {1.0 - a, 1.0 - b}, 1.0});
  }
  out.train.push_back(std::move(stream));
  return out;
}

}  // namespace fedres
