#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cbtrl/feasibility.hpp"
#include "cbtrl/rl.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

// FNV-1a, used for dataset lineage stamps.
inline std::uint64_t fnv1a(const void* data, size_t n,
                           std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t hash_dataset(const std::vector<TransitionRecord>& data) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix_doubles = [&h](const std::vector<double>& v) {
    h = fnv1a(v.data(), v.size() * sizeof(double), h);
  };
  for (const auto& r : data) {
    mix_doubles(r.state);
    h = fnv1a(&r.action, sizeof(r.action), h);
    h = fnv1a(&r.reward, sizeof(r.reward), h);
    mix_doubles(r.next_state);
    unsigned char flags = (r.terminated ? 1 : 0) | (r.truncated ? 2 : 0);
    h = fnv1a(&flags, 1, h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Binary table files. Doubles are stored as raw little-endian IEEE-754
// bytes, so save/load round-trips are bit exact.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("truncated table file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_double(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(os, bits);
}

inline double get_double(std::istream& is) {
  std::uint64_t bits = get_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  auto n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw Error("truncated table file");
  return s;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read '" + path + "'");
  return is;
}

inline void expect_magic(std::istream& is, std::uint64_t magic,
                         const std::string& what) {
  if (get_u64(is) != magic)
    throw Error("not a " + what + " file (bad magic)");
}

constexpr std::uint64_t kControllerMagic = 0x4c425443'31515443ull;
constexpr std::uint64_t kTabularMagic = 0x4c425443'31534246ull;
constexpr std::uint64_t kFittedMagic = 0x4c425443'31465246ull;

}  // namespace detail

inline void save_controller(const QTableController& c, const std::string& path) {
  auto os = detail::open_out(path);
  detail::put_u64(os, detail::kControllerMagic);
  detail::put_string(os, c.name());
  detail::put_u64(os, static_cast<std::uint64_t>(c.n_states()));
  detail::put_u64(os, static_cast<std::uint64_t>(c.action_count()));
  for (double q : c.table()) detail::put_double(os, q);
}

inline QTableController load_controller(const std::string& path,
                                        QTableController::Encoder encoder) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, detail::kControllerMagic, "controller table");
  auto name = detail::get_string(is);
  auto n_states = static_cast<StateId>(detail::get_u64(is));
  auto n_actions = static_cast<int>(detail::get_u64(is));
  QTableController c(name, n_states, n_actions, std::move(encoder));
  for (double& q : c.table()) q = detail::get_double(is);
  return c;
}

inline void save_estimator(const TabularEstimator& e, const std::string& path) {
  auto os = detail::open_out(path);
  detail::put_u64(os, detail::kTabularMagic);
  detail::put_string(os, e.constraint_name());
  detail::put_double(os, e.gamma());
  detail::put_u64(os, static_cast<std::uint64_t>(e.n_states()));
  detail::put_u64(os, static_cast<std::uint64_t>(e.action_count()));
  for (double q : e.table()) detail::put_double(os, q);
}

inline TabularEstimator load_tabular_estimator(
    const std::string& path, TabularEstimator::Encoder encoder) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, detail::kTabularMagic, "feasibility table");
  auto name = detail::get_string(is);
  double gamma = detail::get_double(is);
  auto n_states = static_cast<StateId>(detail::get_u64(is));
  auto n_actions = static_cast<int>(detail::get_u64(is));
  TabularEstimator e(name, gamma, n_states, n_actions, std::move(encoder));
  for (double& q : e.table()) q = detail::get_double(is);
  return e;
}

inline void save_fitted(const FittedEstimator& e, const std::string& path) {
  auto os = detail::open_out(path);
  detail::put_u64(os, detail::kFittedMagic);
  detail::put_string(os, e.constraint_name());
  detail::put_double(os, e.gamma());
  detail::put_u64(os, static_cast<std::uint64_t>(e.action_count()));
  detail::put_u64(os, static_cast<std::uint64_t>(e.n_features()));
  for (double w : e.weights()) detail::put_double(os, w);
}

inline FittedEstimator load_fitted_estimator(const std::string& path,
                                             FeatureFn features) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, detail::kFittedMagic, "fitted feasibility");
  auto name = detail::get_string(is);
  double gamma = detail::get_double(is);
  auto n_actions = static_cast<int>(detail::get_u64(is));
  auto n_features = static_cast<int>(detail::get_u64(is));
  FittedEstimator e(name, gamma, n_actions, n_features, std::move(features));
  for (double& w : e.weights()) w = detail::get_double(is);
  return e;
}

}  // namespace cbtrl
