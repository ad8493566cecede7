#include "opera/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "opera/errors.hpp"

namespace opera {

DiscriminatorClass DiscriminatorClass::trivial(int num_states, int num_actions) {
  return listed(num_states, num_actions,
                {Matrix::Zero(num_states * num_actions, num_states)});
}

DiscriminatorClass DiscriminatorClass::listed(int num_states, int num_actions,
                                              std::vector<Matrix> tables) {
  if (tables.empty()) throw InputError("discriminator class must be nonempty");
  for (const auto& t : tables) {
    if (t.rows() != num_states * num_actions || t.cols() != num_states) {
      throw InputError("discriminator table has wrong shape");
    }
  }
  DiscriminatorClass out;
  out.num_states_ = num_states;
  out.num_actions_ = num_actions;
  out.tables_ = std::move(tables);
  return out;
}

DiscriminatorClass DiscriminatorClass::assembled(int num_states, int num_actions,
                                                 std::vector<Vector> base) {
  if (base.empty()) throw InputError("discriminator base must be nonempty");
  for (const auto& u : base) {
    if (u.size() != num_states) throw InputError("discriminator base function has wrong size");
  }
  DiscriminatorClass out;
  out.num_states_ = num_states;
  out.num_actions_ = num_actions;
  out.assembled_ = true;
  out.base_ = std::move(base);
  return out;
}

DiscriminatorClass DiscriminatorClass::indicator_family(int num_states, int num_actions,
                                                        double bound) {
  if (num_states > 20) throw InputError("indicator family is limited to 20 states");
  std::vector<Vector> base{Vector::Zero(num_states)};
  for (std::uint32_t mask = 1; mask < (1u << num_states); ++mask) {
    Vector u = Vector::Zero(num_states);
    for (int s = 0; s < num_states; ++s) {
      if (mask & (1u << s)) u(s) = bound;
    }
    base.push_back(u);
    base.push_back(-u);
  }
  return assembled(num_states, num_actions, std::move(base));
}

std::int64_t DiscriminatorClass::size() const {
  if (!assembled_) return static_cast<std::int64_t>(tables_.size());
  const double logs = log_size();
  if (logs >= std::log(static_cast<double>(std::numeric_limits<std::int64_t>::max()))) {
    return std::numeric_limits<std::int64_t>::max();
  }
  std::int64_t n = 1;
  for (int c = 0; c < num_cells(); ++c) n *= static_cast<std::int64_t>(base_.size());
  return n;
}

double DiscriminatorClass::log_size() const {
  if (!assembled_) return std::log(static_cast<double>(tables_.size()));
  return num_cells() * std::log(static_cast<double>(base_.size()));
}

int DiscriminatorClass::choice_at(std::int64_t k, int cell) const {
  if (!assembled_) return static_cast<int>(k);
  const auto radix = static_cast<std::int64_t>(base_.size());
  for (int c = 0; c < cell; ++c) k /= radix;
  return static_cast<int>(k % radix);
}

double DiscriminatorClass::value(std::int64_t k, int s, int a, int next) const {
  if (!assembled_) return tables_[static_cast<std::size_t>(k)](s * num_actions_ + a, next);
  return base_[choice_at(k, cell_of(s, a))](next);
}

std::int64_t DiscriminatorClass::element_with(int cell, int u) const {
  if (!assembled_) return u;
  std::int64_t k = u;
  for (int c = 0; c < cell; ++c) k *= static_cast<std::int64_t>(base_.size());
  return k;
}

std::int64_t DiscriminatorClass::element_from_choices(const std::vector<int>& choice) const {
  if (!assembled_) return choice.at(0);
  std::int64_t k = 0;
  for (int c = num_cells() - 1; c >= 0; --c) {
    k = k * static_cast<std::int64_t>(base_.size()) + choice.at(c);
  }
  return k;
}

double DiscriminatorClass::bound() const {
  double b = 0.0;
  for (const auto& t : tables_) b = std::max(b, t.cwiseAbs().maxCoeff());
  for (const auto& u : base_) b = std::max(b, u.cwiseAbs().maxCoeff());
  return b;
}

bool DiscriminatorClass::is_symmetric(double tol) const {
  if (assembled_) {
    return std::all_of(base_.begin(), base_.end(), [&](const Vector& u) {
      return std::any_of(base_.begin(), base_.end(),
                         [&](const Vector& w) { return (u + w).cwiseAbs().maxCoeff() <= tol; });
    });
  }
  return std::all_of(tables_.begin(), tables_.end(), [&](const Matrix& t) {
    return std::any_of(tables_.begin(), tables_.end(),
                       [&](const Matrix& w) { return (t + w).cwiseAbs().maxCoeff() <= tol; });
  });
}

double DiscriminatorClass::distance(std::int64_t i, std::int64_t j) const {
  double d = 0.0;
  for (int s = 0; s < num_states_; ++s) {
    for (int a = 0; a < num_actions_; ++a) {
      for (int sp = 0; sp < num_states_; ++sp) {
        d = std::max(d, std::abs(value(i, s, a, sp) - value(j, s, a, sp)));
      }
    }
  }
  return d;
}

}  // namespace opera
