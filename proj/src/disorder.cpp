#include "semiflex/disorder.hpp"

#include <algorithm>
#include <deque>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace semiflex {

using nlohmann::json;

namespace {

constexpr int kCheckpointShift = 16;  // markov checkpoints every 2^16 steps
constexpr std::uint64_t kMarkovTag = 0x6d61726b6f76ULL;

void require_same_dim(const std::vector<Rotation>& rs, const char* what) {
  if (rs.empty()) throw std::invalid_argument(std::string(what) + ": empty state list");
  for (const auto& r : rs) {
    if (r.dim() != rs.front().dim()) throw std::invalid_argument(std::string(what) + ": mixed dimensions");
  }
}

bool strongly_connected(const Matrix& p) {
  const auto n = p.rows();
  auto reach = [&](bool reverse) {
    std::vector<char> seen(n, 0);
    std::deque<Eigen::Index> todo{0};
    seen[0] = 1;
    while (!todo.empty()) {
      const auto i = todo.front();
      todo.pop_front();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = reverse ? p(j, i) : p(i, j);
        if (w > 0.0 && !seen[j]) {
          seen[j] = 1;
          todo.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(false) && reach(true);
}

std::size_t draw(const std::vector<double>& cumulative, double u) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<double> cumulate(const double* w, std::size_t n) {
  std::vector<double> c(n);
  std::partial_sum(w, w + n, c.begin());
  c.back() = 1.0;
  return c;
}

}  // namespace

struct DisorderModel::Impl {
  DisorderKind kind = DisorderKind::constant;
  int dim = 0;
  std::uint64_t seed = 0;
  std::optional<RotationLaw> law;  // iid
  std::vector<Rotation> states;    // periodic / markov / constant
  std::size_t phase = 0;           // periodic
  bool random_phase = false;
  Matrix transition;               // markov
  bool stationary_start = true;
  std::vector<double> pi;          // markov stationary law
  std::vector<double> start_cdf;
  std::vector<std::vector<double>> row_cdf;

  mutable std::mutex cache_mutex;
  mutable std::vector<std::uint32_t> checkpoints;  // state at n = k * 2^16 + 1

  std::size_t markov_first() const {
    const double u = RngStream::keyed(seed ^ kMarkovTag, 1).uniform();
    return stationary_start ? draw(start_cdf, u) : 0;
  }
  std::size_t markov_step(std::size_t from, std::uint64_t n) const {
    return draw(row_cdf[from], RngStream::keyed(seed ^ kMarkovTag, n).uniform());
  }
  std::size_t markov_state(std::uint64_t n) const {
    const std::uint64_t k = (n - 1) >> kCheckpointShift;
    std::size_t s;
    {
      std::lock_guard<std::mutex> lock(cache_mutex);
      if (checkpoints.empty()) checkpoints.push_back(static_cast<std::uint32_t>(markov_first()));
      while (checkpoints.size() <= k) {
        std::uint64_t m = ((checkpoints.size() - 1) << kCheckpointShift) + 1;
        std::size_t x = checkpoints.back();
        for (std::uint64_t i = 0; i < (1ULL << kCheckpointShift); ++i) x = markov_step(x, ++m);
        checkpoints.push_back(static_cast<std::uint32_t>(x));
      }
      s = checkpoints[k];
    }
    for (std::uint64_t m = (k << kCheckpointShift) + 1; m < n;) s = markov_step(s, ++m);
    return s;
  }
};

std::string to_string(DisorderKind k) {
  switch (k) {
    case DisorderKind::iid: return "iid";
    case DisorderKind::periodic: return "periodic";
    case DisorderKind::markov: return "markov";
    case DisorderKind::constant: return "constant";
  }
  return "?";
}

Vector stationary_distribution(const Matrix& p) {
  const auto n = p.rows();
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector x = a.fullPivLu().solve(b);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = std::max(x(i), 0.0);
  return x / x.sum();
}

DisorderModel DisorderModel::iid(RotationLaw law, std::uint64_t seed) {
  auto impl = std::make_shared<Impl>();
  impl->kind = DisorderKind::iid;
  impl->dim = law.dim();
  impl->seed = seed;
  impl->law = std::move(law);
  return DisorderModel(std::move(impl), 0);
}

DisorderModel DisorderModel::periodic(std::vector<Rotation> period, bool random_phase, std::uint64_t seed) {
  require_same_dim(period, "periodic disorder");
  auto impl = std::make_shared<Impl>();
  impl->kind = DisorderKind::periodic;
  impl->dim = period.front().dim();
  impl->seed = seed;
  impl->random_phase = random_phase;
  impl->phase = random_phase ? RngStream::keyed(seed, 0)() % period.size() : 0;
  impl->states = std::move(period);
  return DisorderModel(std::move(impl), 0);
}

DisorderModel DisorderModel::markov(std::vector<Rotation> states, Matrix transition, bool stationary_start,
                                    std::uint64_t seed) {
  require_same_dim(states, "markov disorder");
  const auto n = static_cast<Eigen::Index>(states.size());
  if (transition.rows() != n || transition.cols() != n) {
    throw std::invalid_argument("markov disorder: transition must be k x k for k states");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(transition(i, j) >= 0.0) || !std::isfinite(transition(i, j))) {
        throw std::invalid_argument("markov disorder: transition entries must be nonnegative");
      }
    }
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("markov disorder: transition rows must sum to 1");
    }
  }
  if (!strongly_connected(transition)) throw std::invalid_argument("markov disorder: not ergodic (reducible)");

  auto impl = std::make_shared<Impl>();
  impl->kind = DisorderKind::markov;
  impl->dim = states.front().dim();
  impl->seed = seed;
  impl->states = std::move(states);
  impl->transition = transition;
  impl->stationary_start = stationary_start;
  const Vector pi = stationary_distribution(transition);
  impl->pi.assign(pi.data(), pi.data() + n);
  impl->start_cdf = cumulate(impl->pi.data(), impl->pi.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> w(n);
    for (Eigen::Index j = 0; j < n; ++j) w[j] = transition(i, j);
    impl->row_cdf.push_back(cumulate(w.data(), w.size()));
  }
  return DisorderModel(std::move(impl), 0);
}

DisorderModel DisorderModel::constant(Rotation g) {
  auto impl = std::make_shared<Impl>();
  impl->kind = DisorderKind::constant;
  impl->dim = g.dim();
  impl->states = {std::move(g)};
  return DisorderModel(std::move(impl), 0);
}

int DisorderModel::dim() const { return impl_->dim; }
DisorderKind DisorderModel::kind() const { return impl_->kind; }
std::uint64_t DisorderModel::seed() const { return impl_->seed; }

bool DisorderModel::is_identity() const {
  if (impl_->kind != DisorderKind::constant) return false;
  const Matrix& g = impl_->states.front().matrix();
  return g == Matrix::Identity(g.rows(), g.cols());
}

std::size_t DisorderModel::state_index(std::uint64_t n) const {
  switch (impl_->kind) {
    case DisorderKind::periodic: return (n - 1 + impl_->phase) % impl_->states.size();
    case DisorderKind::markov: return impl_->markov_state(n);
    case DisorderKind::constant: return 0;
    case DisorderKind::iid: break;
  }
  throw std::logic_error("state_index: iid model has no state list");
}

Rotation DisorderModel::at(std::uint64_t n) const {
  if (n < 1) throw std::invalid_argument("disorder: indices start at 1");
  const std::uint64_t m = n + offset_;
  if (impl_->kind == DisorderKind::iid) {
    RngStream rng = RngStream::keyed(impl_->seed, m);
    return sample(*impl_->law, rng);
  }
  return impl_->states[state_index(m)];
}

template <int D>
void DisorderModel::window_into(std::uint64_t start, std::size_t length,
                                std::vector<Eigen::Matrix<double, D, D>>& out) const {
  if (start < 1) throw std::invalid_argument("disorder: indices start at 1");
  if (D != Eigen::Dynamic && D != impl_->dim) throw std::invalid_argument("window_into: dimension mismatch");
  out.resize(length);
  const std::uint64_t first = start + offset_;
  switch (impl_->kind) {
    case DisorderKind::iid:
      for (std::size_t i = 0; i < length; ++i) {
        RngStream rng = RngStream::keyed(impl_->seed, first + i);
        sample_into<D>(*impl_->law, rng, out[i]);
      }
      return;
    case DisorderKind::markov: {
      if (length == 0) return;
      std::size_t s = impl_->markov_state(first);
      out[0] = impl_->states[s].matrix();
      for (std::size_t i = 1; i < length; ++i) {
        s = impl_->markov_step(s, first + i);
        out[i] = impl_->states[s].matrix();
      }
      return;
    }
    case DisorderKind::periodic:
    case DisorderKind::constant:
      for (std::size_t i = 0; i < length; ++i) out[i] = impl_->states[state_index(first + i)].matrix();
      return;
  }
}

template void DisorderModel::window_into<2>(std::uint64_t, std::size_t,
                                            std::vector<Eigen::Matrix<double, 2, 2>>&) const;
template void DisorderModel::window_into<3>(std::uint64_t, std::size_t,
                                            std::vector<Eigen::Matrix<double, 3, 3>>&) const;
template void DisorderModel::window_into<Eigen::Dynamic>(std::uint64_t, std::size_t,
                                                         std::vector<Matrix>&) const;

std::vector<Rotation> DisorderModel::window(std::uint64_t start, std::size_t length) const {
  std::vector<Matrix> raw;
  window_into<Eigen::Dynamic>(start, length, raw);
  std::vector<Rotation> out;
  out.reserve(length);
  for (auto& m : raw) out.push_back(Rotation::from_matrix(m, 1e-9));
  return out;
}

std::vector<double> DisorderModel::angles(std::uint64_t start, std::size_t length) const {
  if (impl_->dim != 2) throw std::invalid_argument("disorder angles: d = 2 only");
  std::vector<Eigen::Matrix2d> raw;
  window_into<2>(start, length, raw);
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = std::atan2(raw[i](1, 0), raw[i](0, 0));
  return out;
}

DisorderModel DisorderModel::shift(std::uint64_t by) const { return DisorderModel(impl_, offset_ + by); }

DisorderModel DisorderModel::reseeded(std::uint64_t seed) const {
  switch (impl_->kind) {
    case DisorderKind::iid: return iid(*impl_->law, seed);
    case DisorderKind::periodic: return periodic(impl_->states, impl_->random_phase, seed);
    case DisorderKind::markov: return markov(impl_->states, impl_->transition, impl_->stationary_start, seed);
    case DisorderKind::constant: return *this;
  }
  return *this;
}

std::optional<Matrix> DisorderModel::mean() const {
  if (impl_->kind == DisorderKind::iid) {
    const auto& e = impl_->law->exact_moments();
    if (!e) return std::nullopt;
    return e->mean;
  }
  if (impl_->kind == DisorderKind::markov && !impl_->stationary_start) return std::nullopt;
  const auto w = stationary();
  Matrix m = Matrix::Zero(impl_->dim, impl_->dim);
  for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * impl_->states[i].matrix();
  return m;
}

const RotationLaw* DisorderModel::iid_law() const { return impl_->law ? &*impl_->law : nullptr; }

const std::vector<Rotation>& DisorderModel::states() const { return impl_->states; }

std::vector<double> DisorderModel::stationary() const {
  switch (impl_->kind) {
    case DisorderKind::markov: return impl_->pi;
    case DisorderKind::periodic:
      return std::vector<double>(impl_->states.size(), 1.0 / impl_->states.size());
    case DisorderKind::constant: return {1.0};
    case DisorderKind::iid: break;
  }
  throw std::logic_error("stationary: iid model has no state list");
}

json DisorderModel::to_json() const {
  json j{{"kind", to_string(impl_->kind)}};
  auto rotations = [](const std::vector<Rotation>& rs) {
    json a = json::array();
    for (const auto& r : rs) a.push_back(rotation_to_json(r));
    return a;
  };
  switch (impl_->kind) {
    case DisorderKind::iid: j["law"] = impl_->law->to_json(); break;
    case DisorderKind::periodic:
      j["rotations"] = rotations(impl_->states);
      j["random_phase"] = impl_->random_phase;
      break;
    case DisorderKind::markov:
      j["states"] = rotations(impl_->states);
      j["transition"] = matrix_to_json(impl_->transition);
      j["stationary_start"] = impl_->stationary_start;
      break;
    case DisorderKind::constant: j["rotation"] = rotation_to_json(impl_->states.front()); break;
  }
  if (impl_->kind != DisorderKind::constant) j["seed"] = impl_->seed;
  if (offset_ != 0) j["offset"] = offset_;
  return j;
}

namespace {

std::vector<Rotation> rotation_list(const json& spec, const char* key) {
  std::vector<Rotation> rs;
  if (spec.contains("angles")) {
    for (double a : spec.at("angles").get<std::vector<double>>()) rs.push_back(Rotation::planar(a));
  } else {
    for (const auto& r : spec.at(key)) rs.push_back(rotation_from_json(r));
  }
  return rs;
}

}  // namespace

DisorderModel make_disorder(const json& spec, std::uint64_t seed) {
  if (!spec.is_object() || !spec.contains("kind")) {
    throw std::invalid_argument("disorder spec: object with \"kind\" required");
  }
  const std::string kind = spec.at("kind").get<std::string>();
  if (spec.contains("seed")) seed = spec.at("seed").get<std::uint64_t>();
  try {
    DisorderModel model = [&]() {
      if (kind == "iid") return DisorderModel::iid(make_law(spec.at("law")), seed);
      if (kind == "periodic") {
        return DisorderModel::periodic(rotation_list(spec, "rotations"), spec.value("random_phase", true), seed);
      }
      if (kind == "markov") {
        return DisorderModel::markov(rotation_list(spec, "states"), matrix_from_json(spec.at("transition")),
                                     spec.value("stationary_start", true), seed);
      }
      if (kind == "constant") {
        if (spec.contains("rotation")) return DisorderModel::constant(rotation_from_json(spec.at("rotation")));
        if (spec.contains("angle")) return DisorderModel::constant(Rotation::planar(spec.at("angle").get<double>()));
        return DisorderModel::constant(Rotation::identity(spec.at("d").get<int>()));
      }
      throw std::invalid_argument("disorder spec: unknown kind \"" + kind + "\"");
    }();
    if (spec.contains("offset")) model = model.shift(spec.at("offset").get<std::uint64_t>());
    return model;
  } catch (const json::exception& e) {
    throw std::invalid_argument("disorder spec \"" + kind + "\": " + e.what());
  }
}

DisorderStream::DisorderStream(DisorderModel model, std::uint64_t cursor)
    : model_(std::move(model)), cursor_(cursor) {
  if (cursor_ < 1) throw std::invalid_argument("DisorderStream: cursor starts at 1");
}

Rotation DisorderStream::next() { return model_.at(cursor_++); }

}  // namespace semiflex
